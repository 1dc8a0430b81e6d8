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

#include "egonet/autograd.hpp"

#include <memory>

#include "egonet/error.hpp"

namespace egonet {

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr});
  grads_.emplace_back();
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (differentiated_) throw std::logic_error("cannot record on a tape after backward");
  Node node{std::move(value), {}, false, nullptr};
  node.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    if (v.id >= nodes_.size()) throw std::out_of_range("tape input refers to a future node");
    node.inputs.push_back(v.id);
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  grads_.emplace_back();
  return Var{nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (differentiated_) {
    throw std::logic_error("backward already ran on this tape; record a new forward pass");
  }
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_string(lv.shape()));
  }
  differentiated_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grads_[loss.id] = Tensor(lv.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || grads_[i].empty()) continue;
    node.backward(*this, grads_[i]);
  }
}

const Tensor& Tape::grad(Var v) const {
  const Tensor& g = grads_.at(v.id);
  if (g.empty()) throw std::logic_error("no gradient recorded for tape node " + std::to_string(v.id));
  return g;
}

void Tape::accumulate(Var v, Tensor g) {
  if (!nodes_.at(v.id).requires_grad) return;
  Tensor& slot = grads_[v.id];
  if (slot.empty()) {
    slot = std::move(g);
  } else {
    slot += g;
  }
}

Var conv2d(Tape& tape, Var x, Var w, Var b, Conv2dParams p) {
  Tensor y = kernels::conv2d(tape.value(x), tape.value(w), tape.value(b), p);
  const Var inputs[] = {x, w, b};
  return tape.push(std::move(y), inputs, [x, w, b, p](Tape& t, const Tensor& g) {
    Tensor dx, dw, db;
    kernels::conv2d_backward(t.value(x), t.value(w), g, p, t.requires_grad(x) ? &dx : nullptr,
                             t.requires_grad(w) ? &dw : nullptr,
                             t.requires_grad(b) ? &db : nullptr);
    if (!dx.empty()) t.accumulate(x, std::move(dx));
    if (!dw.empty()) t.accumulate(w, std::move(dw));
    if (!db.empty()) t.accumulate(b, std::move(db));
  });
}

Var relu(Tape& tape, Var x) {
  Tensor y = kernels::relu(tape.value(x));
  const Var inputs[] = {x};
  return tape.push(std::move(y), inputs, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, kernels::relu_backward(t.value(x), g));
  });
}

Var maxpool2d(Tape& tape, Var x, int k, int stride, int pad) {
  auto r = kernels::maxpool2d(tape.value(x), k, stride, pad);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(std::move(r.argmax));
  const Var inputs[] = {x};
  return tape.push(std::move(r.y), inputs, [x, argmax](Tape& t, const Tensor& g) {
    t.accumulate(x, kernels::maxpool2d_backward(t.value(x).shape(), *argmax, g));
  });
}

Var concat_channels(Tape& tape, std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("concat_channels requires at least one input");
  std::vector<const Tensor*> values;
  values.reserve(xs.size());
  for (Var v : xs) values.push_back(&tape.value(v));
  Tensor y = kernels::concat_channels(values);
  std::vector<Var> parts(xs.begin(), xs.end());
  return tape.push(std::move(y), xs, [parts](Tape& t, const Tensor& g) {
    std::size_t c0 = 0;
    for (Var v : parts) {
      const std::size_t c = t.value(v).dim(1);
      if (t.requires_grad(v)) t.accumulate(v, kernels::slice_channels(g, c0, c));
      c0 += c;
    }
  });
}

Var dropout(Tape& tape, Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ShapeError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const Tensor& xv = tape.value(x);
  auto mask = std::make_shared<Tensor>(xv.shape());
  const double scale = 1.0 / (1.0 - rate);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : scale;
    (*mask)[i] = m;
    y[i] = xv[i] * m;
  }
  const Var inputs[] = {x};
  return tape.push(std::move(y), inputs, [x, mask](Tape& t, const Tensor& g) {
    Tensor dx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*mask)[i];
    t.accumulate(x, std::move(dx));
  });
}

Var bilinear_upsample(Tape& tape, Var x, int factor) {
  Tensor y = kernels::bilinear_upsample(tape.value(x), factor);
  const Var inputs[] = {x};
  return tape.push(std::move(y), inputs, [x, factor](Tape& t, const Tensor& g) {
    t.accumulate(x, kernels::bilinear_upsample_backward(t.value(x).shape(), g, factor));
  });
}

SoftmaxLossVar softmax_loss(Tape& tape, Var logits, const Tensor& labels) {
  auto r = kernels::softmax_loss(tape.value(logits), labels);
  auto saved = std::make_shared<std::pair<Tensor, Tensor>>(r.probs, labels);
  const Var inputs[] = {logits};
  Var loss = tape.push(Tensor::scalar(r.loss), inputs, [logits, saved](Tape& t, const Tensor& g) {
    t.accumulate(logits, kernels::softmax_loss_backward(saved->first, saved->second, g[0]));
  });
  return {loss, std::move(r.probs)};
}

Var sum(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v;
  const Var inputs[] = {x};
  return tape.push(Tensor::scalar(s), inputs, [x](Tape& t, const Tensor& g) {
    t.accumulate(x, Tensor(t.value(x).shape(), g[0]));
  });
}

Var dot(Tape& tape, Var x, const Tensor& coeffs) {
  const Tensor& xv = tape.value(x);
  if (coeffs.size() != xv.size()) {
    throw ShapeError("dot operand sizes differ: " + shape_string(xv.shape()) + " vs " +
                     shape_string(coeffs.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv[i] * coeffs[i];
  const Var inputs[] = {x};
  return tape.push(Tensor::scalar(s), inputs, [x, coeffs](Tape& t, const Tensor& g) {
    Tensor dx(t.value(x).shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = coeffs[i] * g[0];
    t.accumulate(x, std::move(dx));
  });
}

Var sum_squares(Tape& tape, Var x) {
  double s = 0.0;
  for (double v : tape.value(x).data()) s += v * v;
  const Var inputs[] = {x};
  return tape.push(Tensor::scalar(s), inputs, [x](Tape& t, const Tensor& g) {
    Tensor dx = t.value(x);
    for (auto& v : dx.data()) v *= 2.0 * g[0];
    t.accumulate(x, std::move(dx));
  });
}

Var add(Tape& tape, Var a, Var b) {
  Tensor y = tape.value(a);
  y += tape.value(b);
  const Var inputs[] = {a, b};
  return tape.push(std::move(y), inputs, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Tape& tape, Var x, double factor) {
  Tensor y = tape.value(x);
  for (auto& v : y.data()) v *= factor;
  const Var inputs[] = {x};
  return tape.push(std::move(y), inputs, [x, factor](Tape& t, const Tensor& g) {
    Tensor dx = g;
    for (auto& v : dx.data()) v *= factor;
    t.accumulate(x, std::move(dx));
  });
}

}  // namespace egonet
