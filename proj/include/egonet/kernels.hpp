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
#include <span>
#include <vector>

#include "egonet/tensor.hpp"

// Raw forward/backward kernels on NCHW tensors. These know nothing about the
// tape; egonet/autograd.hpp wires them into differentiable ops.
namespace egonet::kernels {

struct Conv2dParams {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

// Output shape of conv2d; throws ShapeError naming both shapes on mismatch.
Shape conv2d_output_shape(const Shape& x, const Shape& w, Conv2dParams p);

// Direct convolution. Each output is accumulated over (c, ki, kj) in
// ascending order, skipping padded taps, and the bias is added last.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dParams p);

// Gradients of conv2d. Null outputs are skipped.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Conv2dParams p,
                     Tensor* dx, Tensor* dw, Tensor* db);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

struct PoolResult {
  Tensor y;
  // Flat index into x of the selected element, one per output element.
  std::vector<std::uint32_t> argmax;
};

Shape maxpool2d_output_shape(const Shape& x, int k, int stride, int pad);
PoolResult maxpool2d(const Tensor& x, int k, int stride, int pad);
Tensor maxpool2d_backward(const Shape& x_shape, const std::vector<std::uint32_t>& argmax,
                          const Tensor& dy);

Tensor concat_channels(std::span<const Tensor* const> xs);
// Slice of dy holding channels [c0, c0 + channels).
Tensor slice_channels(const Tensor& dy, std::size_t c0, std::size_t channels);

// Align-corners bilinear upsampling by an integer factor.
Tensor bilinear_upsample(const Tensor& x, int factor);
Tensor bilinear_upsample_backward(const Shape& x_shape, const Tensor& dy, int factor);

struct SoftmaxLoss {
  double loss = 0.0;
  Tensor probs;  // B x 2 x H x W
};

// Two-class per-pixel softmax cross-entropy averaged over all B*H*W pixels.
// labels is B x H x W with values exactly 0 or 1.
SoftmaxLoss softmax_loss(const Tensor& logits, const Tensor& labels);
// Gradient w.r.t. logits scaled by upstream scalar gradient g.
Tensor softmax_loss_backward(const Tensor& probs, const Tensor& labels, double g);

}  // namespace egonet::kernels
