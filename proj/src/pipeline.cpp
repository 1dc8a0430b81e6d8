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

#include "egonet/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "egonet/error.hpp"
#include "egonet/rng.hpp"

namespace egonet::pipeline {

namespace {

const std::set<std::string, std::less<>> kModelKeys = {
    "input_height", "input_width", "rgb_pathway", "dhg_pathway", "embed_channels",
    "blend_channels", "dropout_rate", "variant"};

}  // namespace

Experiment parse_experiment(std::string_view text, Experiment base) {
  std::string model_text = model::format_config(base.model), train_text;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string body = line.substr(0, line.find('#'));
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      if (body.find_first_not_of(" \t\r") != std::string::npos) {
        throw ShapeError("config line without '=': " + line);
      }
      continue;
    }
    std::string key = body.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    if (kModelKeys.contains(key)) model_text += body + "\n";
    if (!kModelKeys.contains(key) || key == "dropout_rate") train_text += body + "\n";
  }
  Experiment e;
  e.model = model::parse_config(model_text);
  e.model.validate();
  e.train = train::parse_train_config(train_text, base.train);
  return e;
}

std::string format_experiment(const Experiment& e) {
  std::string train_text = train::format_train_config(e.train);
  // dropout_rate is already part of the model block.
  std::istringstream in(train_text);
  std::string line, out = model::format_config(e.model);
  while (std::getline(in, line)) {
    if (line.rfind("dropout_rate", 0) != 0) out += line + "\n";
  }
  return out;
}

SceneSamples load_samples(const data::Dataset& dataset, std::size_t height, std::size_t width) {
  SceneSamples out;
  for (const auto& id : dataset.scene_ids()) out.emplace(id, dataset.samples(id, height, width));
  return out;
}

std::vector<Tensor> predict_samples(const model::EgoNet& net, const model::EgoNetParams& params,
                                    std::span<const Sample> samples, std::size_t batch) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t n = std::min(batch, samples.size() - start);
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = start + k;
    const train::Batch b = train::make_batch(samples, idx);
    const Tensor probs = net.predict(b.rgb, b.dhg, params);
    const std::size_t h = probs.dim(1), w = probs.dim(2);
    for (std::size_t k = 0; k < n; ++k) {
      const auto first = probs.data().begin() + static_cast<std::ptrdiff_t>(k * h * w);
      out.emplace_back(Shape{h, w}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(h * w)));
    }
  }
  return out;
}

model::EgoNetParams initial_params(const model::EgoNet& net, std::uint64_t seed) {
  return net.init_params(Rng::derive(seed, 0));
}

train::TrainResult train_model(const Experiment& e, std::span<const Sample> train_set,
                               const train::TrainCallbacks& callbacks) {
  const model::EgoNet net(e.model);
  return train::train_loop(net, initial_params(net, e.train.seed), train_set, e.train, callbacks);
}

eval::Method model_method(const Experiment& e) {
  return [e](std::span<const Sample> train_set, std::span<const Sample> test) {
    const model::EgoNet net(e.model);
    const auto result = train_model(e, train_set);
    return predict_samples(net, result.params, test);
  };
}

eval::Method baseline_method(std::string_view name) {
  if (name == "aop") {
    return [](std::span<const Sample> train_set, std::span<const Sample> test) {
      std::vector<Tensor> masks;
      for (const auto& s : train_set) masks.push_back(s.label);
      std::vector<Tensor> out;
      for (const auto& s : test) out.push_back(eval::aop_baseline(masks, s.label.dim(0), s.label.dim(1)));
      return out;
    };
  }
  if (name == "center") {
    return [](std::span<const Sample>, std::span<const Sample> test) {
      std::vector<Tensor> out;
      for (const auto& s : test) out.push_back(eval::center_prior(s.label.dim(0), s.label.dim(1)));
      return out;
    };
  }
  if (name == "constant") {
    return [](std::span<const Sample> train_set, std::span<const Sample> test) {
      double pos = 0.0, total = 0.0;
      for (const auto& s : train_set) {
        for (double v : s.label.data()) pos += v;
        total += static_cast<double>(s.label.size());
      }
      const double rate = total > 0.0 ? pos / total : 0.0;
      std::vector<Tensor> out;
      for (const auto& s : test) out.push_back(eval::constant_map(s.label.dim(0), s.label.dim(1), rate));
      return out;
    };
  }
  throw ShapeError("unknown baseline '" + std::string(name) + "' (expected aop, center or constant)");
}

std::size_t thread_count_from_env() {
  if (const char* env = std::getenv("EGONET_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
    throw ShapeError(std::string("EGONET_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

eval::EvalReport leave_one_out(const SceneSamples& samples, const eval::Method& method,
                               std::span<const double> thresholds, std::size_t threads) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : samples) ids.push_back(id);
  const auto splits = train::leave_one_out_splits(ids);
  std::vector<eval::SceneScore> scores(splits.size());
  parallel_for(splits.size(), threads, [&](std::size_t i) {
    const auto& split = splits[i];
    std::vector<Sample> train_set;
    for (const auto& id : split.train) {
      const auto& s = samples.at(id);
      train_set.insert(train_set.end(), s.begin(), s.end());
    }
    const auto& test = samples.at(split.test);
    const auto preds = method(train_set, test);
    std::vector<Tensor> masks;
    for (const auto& s : test) masks.push_back(s.label);
    scores[i] = eval::score_scene(split.test, preds, masks, thresholds);
  });
  return eval::make_report(std::move(scores));
}

std::vector<AblationRow> run_ablation(const SceneSamples& samples, const Experiment& experiment,
                                      std::span<const double> thresholds, std::size_t threads) {
  std::vector<std::string> ids;
  for (const auto& [id, _] : samples) ids.push_back(id);
  const auto splits = train::leave_one_out_splits(ids);
  const std::size_t nv = std::size(model::kAllVariants), ns = splits.size();
  std::vector<eval::SceneScore> scores(nv * ns);
  parallel_for(nv * ns, threads, [&](std::size_t job) {
    Experiment e = experiment;
    e.model.variant = model::kAllVariants[job / ns];
    const auto& split = splits[job % ns];
    std::vector<Sample> train_set;
    for (const auto& id : split.train) {
      const auto& s = samples.at(id);
      train_set.insert(train_set.end(), s.begin(), s.end());
    }
    const auto& test = samples.at(split.test);
    const auto preds = model_method(e)(train_set, test);
    std::vector<Tensor> masks;
    for (const auto& s : test) masks.push_back(s.label);
    scores[job] = eval::score_scene(split.test, preds, masks, thresholds);
  });
  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<eval::SceneScore> per(scores.begin() + static_cast<std::ptrdiff_t>(v * ns),
                                      scores.begin() + static_cast<std::ptrdiff_t>((v + 1) * ns));
    rows.push_back({model::kAllVariants[v], eval::make_report(std::move(per))});
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "variant,MF,AP\n";
  for (const auto& r : rows) {
    out << model::variant_name(r.variant) << ',' << r.report.mean_mf << ',' << r.report.mean_ap << '\n';
  }
}

}  // namespace egonet::pipeline
