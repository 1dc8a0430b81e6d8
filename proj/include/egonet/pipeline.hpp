/* Copyright 2026 The EgoNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egonet/data.hpp"
#include "egonet/eval.hpp"
#include "egonet/model.hpp"
#include "egonet/trainer.hpp"

// End-to-end glue shared by the command line, the acceptance suite and the
// Python module: experiment configs, model and baseline methods, and
// leave-one-out runs.
namespace egonet::pipeline {

struct Experiment {
  model::EgoNetConfig model = model::EgoNetConfig::toy();
  train::TrainConfig train = train::TrainConfig::toy();

  friend bool operator==(const Experiment&, const Experiment&) = default;
};

// One "key = value" file holding both model and training keys. dropout_rate
// applies to both.
Experiment parse_experiment(std::string_view text, Experiment base = {});
std::string format_experiment(const Experiment& experiment);

using SceneSamples = std::map<std::string, std::vector<Sample>>;
SceneSamples load_samples(const data::Dataset& dataset, std::size_t height, std::size_t width);

// Probability maps (H x W each), evaluated in chunks of `batch` frames.
std::vector<Tensor> predict_samples(const model::EgoNet& net, const model::EgoNetParams& params,
                                    std::span<const Sample> samples, std::size_t batch = 16);

// Initial weights for a training run with this seed.
model::EgoNetParams initial_params(const model::EgoNet& net, std::uint64_t seed);

train::TrainResult train_model(const Experiment& experiment, std::span<const Sample> train_set,
                               const train::TrainCallbacks& callbacks = {});

// Trains from scratch on the train samples, then predicts the test samples.
eval::Method model_method(const Experiment& experiment);

// "aop": mean training mask; "center": centre prior; "constant": the
// training positive rate everywhere.
eval::Method baseline_method(std::string_view name);

// Worker count from EGONET_THREADS (default: hardware concurrency, min 1).
std::size_t thread_count_from_env();

// Runs fn(0..n-1) on up to `threads` workers. The first exception thrown is
// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Leave-one-out over every scene, splits run in parallel.
eval::EvalReport leave_one_out(const SceneSamples& samples, const eval::Method& method,
                               std::span<const double> thresholds, std::size_t threads = 1);

struct AblationRow {
  model::Variant variant;
  eval::EvalReport report;
};

// The four variants share the training seed and the splits.
std::vector<AblationRow> run_ablation(const SceneSamples& samples, const Experiment& experiment,
                                      std::span<const double> thresholds, std::size_t threads = 1);

// Header "variant,MF,AP" and one row per variant.
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows);

}  // namespace egonet::pipeline
