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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "egonet/model.hpp"
#include "egonet/rng.hpp"
#include "egonet/sample.hpp"

namespace egonet::train {

struct TrainConfig {
  double learning_rate = 0.03;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 4;
  std::size_t iterations = 400;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints

  // From-scratch defaults for desk-scale runs (the member defaults). No
  // dropout: at 0.5 the two joint dropout layers make 400-step runs
  // seed-fragile.
  static TrainConfig toy();
  // lr 1e-6, momentum 0.9, decay 5e-4, batch 15, 3000 iterations, dropout 0.5.
  static TrainConfig paper();
  static TrainConfig preset(std::string_view name);

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// "key = value" text; keys not present keep the values of `base`.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = TrainConfig::toy());
std::string format_train_config(const TrainConfig& config);

struct OptimizerState {
  std::map<std::string, Tensor> velocity;
  std::size_t iteration = 0;
};

// Classic momentum with L2 decay folded into the gradient:
//   v <- momentum * v - lr * (g + decay * w);  w <- w + v
// Throws NumericError (leaving params untouched) if any gradient is not finite.
void sgd_momentum_step(model::EgoNetParams& params, const std::map<std::string, Tensor>& grads,
                       OptimizerState& state, const TrainConfig& config);

/// Seeded epoch-wise shuffler. Each epoch is a fresh Fisher-Yates
/// permutation of [0, n); batches are consecutive slices, the last one short.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double loss = 0.0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct TrainCallbacks {
  std::function<void(const TraceEntry&)> on_step;
  std::function<void(std::size_t iteration, const model::EgoNetParams&)> on_checkpoint;
};

struct TrainResult {
  model::EgoNetParams params;
  std::vector<TraceEntry> trace;
};

// Stacks samples into B x 3 x H x W inputs and a B x H x W label tensor.
struct Batch {
  Tensor rgb;
  Tensor dhg;
  Tensor labels;
};
Batch make_batch(std::span<const Sample> data, std::span<const std::size_t> indices);

// Runs config.iterations steps of forward (dropout active), per-pixel softmax
// loss, backward and sgd_momentum_step. Throws NumericError naming the batch's
// frame ids if a loss is not finite.
TrainResult train_loop(const model::EgoNet& net, model::EgoNetParams params,
                       std::span<const Sample> data, const TrainConfig& config,
                       const TrainCallbacks& callbacks = {});

struct Split {
  std::vector<std::string> train;
  std::string test;
};

// One split per scene, holding that scene out.
std::vector<Split> leave_one_out_splits(const std::vector<std::string>& scene_ids);

void write_loss_trace_csv(const std::filesystem::path& path, std::span<const TraceEntry> trace);

}  // namespace egonet::train
