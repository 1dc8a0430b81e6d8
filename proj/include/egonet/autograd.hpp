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
#include <functional>
#include <span>
#include <vector>

#include "egonet/kernels.hpp"
#include "egonet/rng.hpp"
#include "egonet/tensor.hpp"

namespace egonet {

using kernels::Conv2dParams;

// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// Each node keeps its forward value; backward walks the tape once in reverse
/// and accumulates gradients into every node that requires one. A tape can be
/// differentiated only once; record a new forward pass to differentiate again.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape& tape, const Tensor& grad_out)>;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op node. requires_grad is inherited from the inputs.
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss);
  bool differentiated() const { return differentiated_; }

  bool has_grad(Var v) const { return !grads_.at(v.id).empty(); }
  // Gradient buffer of v; throws if backward did not reach v.
  const Tensor& grad(Var v) const;

  // Adds g into the gradient buffer of v (no-op if v needs no gradient).
  void accumulate(Var v, Tensor g);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool differentiated_ = false;
};

Var conv2d(Tape& tape, Var x, Var w, Var b, Conv2dParams p);
Var relu(Tape& tape, Var x);
Var maxpool2d(Tape& tape, Var x, int k, int stride, int pad = 0);
Var concat_channels(Tape& tape, std::span<const Var> xs);

// Inverted dropout: survivors scaled by 1/(1 - rate). Identity when
// training is false or rate is 0; the mask is drawn from rng otherwise.
Var dropout(Tape& tape, Var x, double rate, bool training, Rng& rng);

Var bilinear_upsample(Tape& tape, Var x, int factor);

struct SoftmaxLossVar {
  Var loss;
  Tensor probs;
};
SoftmaxLossVar softmax_loss(Tape& tape, Var logits, const Tensor& labels);

// Scalar reductions, mostly for building test objectives.
Var sum(Tape& tape, Var x);
Var dot(Tape& tape, Var x, const Tensor& coeffs);
Var sum_squares(Tape& tape, Var x);
Var add(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double factor);

}  // namespace egonet
