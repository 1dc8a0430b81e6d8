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

#include "egonet/trainer.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "egonet/error.hpp"

namespace egonet::train {

TrainConfig TrainConfig::toy() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.learning_rate = 1e-6;
  c.momentum = 0.9;
  c.weight_decay = 0.0005;
  c.batch_size = 15;
  c.iterations = 3000;
  c.dropout_rate = 0.5;
  return c;
}

TrainConfig TrainConfig::preset(std::string_view name) {
  if (name == "toy") return toy();
  if (name == "paper") return paper();
  throw ShapeError("unknown preset '" + std::string(name) + "' (expected toy or paper)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ShapeError("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ShapeError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ShapeError("weight decay must be >= 0");
  if (batch_size == 0) throw ShapeError("batch size must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ShapeError("dropout rate must lie in [0, 1)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double number(std::string_view v, std::string_view key) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw ShapeError("bad value '" + s + "' for " + std::string(key));
  }
  return out;
}

std::uint64_t integer(std::string_view v, std::string_view key) {
  std::string s(v);
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || s[0] == '-') {
    throw ShapeError("bad value '" + s + "' for " + std::string(key));
  }
  return out;
}

}  // namespace

TrainConfig parse_train_config(std::string_view text, TrainConfig c) {
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::string_view line = raw;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ShapeError("config line without '=': " + std::string(line));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "preset") {
      c = TrainConfig::preset(value);
    } else if (key == "learning_rate") {
      c.learning_rate = number(value, key);
    } else if (key == "momentum") {
      c.momentum = number(value, key);
    } else if (key == "weight_decay") {
      c.weight_decay = number(value, key);
    } else if (key == "batch_size") {
      c.batch_size = integer(value, key);
    } else if (key == "iterations") {
      c.iterations = integer(value, key);
    } else if (key == "dropout_rate") {
      c.dropout_rate = number(value, key);
    } else if (key == "seed") {
      c.seed = integer(value, key);
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = integer(value, key);
    } else {
      throw ShapeError("unknown training key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "learning_rate = " << c.learning_rate << '\n'
     << "momentum = " << c.momentum << '\n'
     << "weight_decay = " << c.weight_decay << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "iterations = " << c.iterations << '\n'
     << "dropout_rate = " << c.dropout_rate << '\n'
     << "seed = " << c.seed << '\n'
     << "checkpoint_every = " << c.checkpoint_every << '\n';
  return os.str();
}

void sgd_momentum_step(model::EgoNetParams& params, const std::map<std::string, Tensor>& grads,
                       OptimizerState& state, const TrainConfig& config) {
  for (const auto& [name, w] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("no gradient for parameter '" + name + "'");
    if (it->second.shape() != w.shape()) {
      throw ShapeError("gradient for '" + name + "' has shape " + shape_string(it->second.shape()) +
                       ", parameter has " + shape_string(w.shape()));
    }
    if (!it->second.all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + name + "' at iteration " +
                         std::to_string(state.iteration));
    }
  }
  for (auto& [name, w] : params) {
    const Tensor& g = grads.at(name);
    auto [vit, inserted] = state.velocity.try_emplace(name, w.shape());
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = config.momentum * v[i] - config.learning_rate * (g[i] + config.weight_decay * w[i]);
      w[i] = w[i] + v[i];
    }
  }
  ++state.iteration;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(n), rng_(seed) {
  if (n == 0) throw ShapeError("cannot sample batches from an empty dataset");
  if (batch_size == 0) throw ShapeError("batch size must be positive");
  reshuffle();
}

void BatchSampler::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  for (std::size_t i = order_.size(); i > 1; --i) {
    const std::size_t j = rng_.below(i);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (cursor_ >= order_.size()) {
    reshuffle();
    ++epoch_;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return out;
}

Batch make_batch(std::span<const Sample> data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("empty batch");
  const Sample& first = data[indices[0]];
  const std::size_t h = first.rgb.dim(1), w = first.rgb.dim(2);
  const std::size_t b = indices.size();
  Batch batch{Tensor(Shape{b, 3, h, w}), Tensor(Shape{b, 3, h, w}), Tensor(Shape{b, h, w})};
  for (std::size_t k = 0; k < b; ++k) {
    const Sample& s = data[indices[k]];
    if (s.rgb.shape() != Shape{3, h, w} || s.dhg.shape() != Shape{3, h, w} ||
        s.label.shape() != Shape{h, w}) {
      throw ShapeError("sample " + s.frame_id + " does not match the batch size " + std::to_string(h) +
                       "x" + std::to_string(w));
    }
    std::copy(s.rgb.data().begin(), s.rgb.data().end(),
              batch.rgb.data().begin() + static_cast<std::ptrdiff_t>(k * 3 * h * w));
    std::copy(s.dhg.data().begin(), s.dhg.data().end(),
              batch.dhg.data().begin() + static_cast<std::ptrdiff_t>(k * 3 * h * w));
    std::copy(s.label.data().begin(), s.label.data().end(),
              batch.labels.data().begin() + static_cast<std::ptrdiff_t>(k * h * w));
  }
  return batch;
}

TrainResult train_loop(const model::EgoNet& net, model::EgoNetParams params,
                       std::span<const Sample> data, const TrainConfig& config,
                       const TrainCallbacks& callbacks) {
  config.validate();
  if (data.empty()) throw ShapeError("training dataset is empty");
  net.check_params(params);

  BatchSampler sampler(data.size(), config.batch_size, Rng::derive(config.seed, 1));
  Rng dropout_rng(Rng::derive(config.seed, 2));
  OptimizerState state;
  TrainResult result;
  result.trace.reserve(config.iterations);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto indices = sampler.next();
    const Batch batch = make_batch(data, indices);
    Tape tape;
    const auto fv = net.record(tape, batch.rgb, batch.dhg, params,
                               model::Mode{true, config.dropout_rate, &dropout_rng});
    const auto loss = softmax_loss(tape, fv.logits, batch.labels);
    const double value = tape.value(loss.loss)[0];
    if (!std::isfinite(value)) {
      std::string ids;
      for (auto i : indices) ids += (ids.empty() ? "" : ", ") + data[i].frame_id;
      throw NumericError("non-finite loss at iteration " + std::to_string(it) + " on batch [" + ids + "]");
    }
    tape.backward(loss.loss);
    std::map<std::string, Tensor> grads;
    for (const auto& [name, var] : fv.params) grads.emplace(name, tape.grad(var));
    sgd_momentum_step(params, grads, state, config);

    const TraceEntry entry{it, value};
    result.trace.push_back(entry);
    if (callbacks.on_step) callbacks.on_step(entry);
    if (callbacks.on_checkpoint && config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0) {
      callbacks.on_checkpoint(it + 1, params);
    }
  }
  result.params = std::move(params);
  return result;
}

std::vector<Split> leave_one_out_splits(const std::vector<std::string>& scene_ids) {
  if (scene_ids.size() < 2) throw ShapeError("leave-one-out needs at least 2 scenes");
  const std::set<std::string> unique(scene_ids.begin(), scene_ids.end());
  if (unique.size() != scene_ids.size()) throw ShapeError("scene ids must be unique");
  std::vector<Split> splits;
  for (std::size_t i = 0; i < scene_ids.size(); ++i) {
    Split s;
    s.test = scene_ids[i];
    for (std::size_t j = 0; j < scene_ids.size(); ++j) {
      if (j != i) s.train.push_back(scene_ids[j]);
    }
    splits.push_back(std::move(s));
  }
  return splits;
}

void write_loss_trace_csv(const std::filesystem::path& path, std::span<const TraceEntry> trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "iteration,loss\n";
  for (const auto& e : trace) out << e.iteration << ',' << e.loss << '\n';
}

}  // namespace egonet::train
