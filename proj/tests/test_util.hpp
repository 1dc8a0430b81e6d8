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

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "egonet/autograd.hpp"
#include "egonet/gradcheck.hpp"
#include "egonet/rng.hpp"
#include "egonet/tensor.hpp"

namespace egonet::testutil {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

inline Shape conv_shape(const Shape& x, const Shape& w, kernels::Conv2dParams p) {
  auto out = [&](std::size_t n, std::size_t k) {
    return (static_cast<long>(n) + 2 * p.pad - p.dilation * (static_cast<long>(k) - 1) - 1) / p.stride + 1;
  };
  return {x[0], w[0], static_cast<std::size_t>(out(x[2], w[2])), static_cast<std::size_t>(out(x[3], w[3]))};
}

// Seven nested loops, padded taps skipped, bias added after the sum.
inline Tensor naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b, kernels::Conv2dParams p) {
  Shape ys = conv_shape(x.shape(), w.shape(), p);
  Tensor y(ys);
  const long ih = static_cast<long>(x.dim(2)), iw = static_cast<long>(x.dim(3));
  for (std::size_t n = 0; n < ys[0]; ++n)
    for (std::size_t o = 0; o < ys[1]; ++o)
      for (std::size_t oy = 0; oy < ys[2]; ++oy)
        for (std::size_t ox = 0; ox < ys[3]; ++ox) {
          double acc = 0.0;
          for (std::size_t c = 0; c < x.dim(1); ++c)
            for (std::size_t ki = 0; ki < w.dim(2); ++ki)
              for (std::size_t kj = 0; kj < w.dim(3); ++kj) {
                long yy = static_cast<long>(oy) * p.stride - p.pad + static_cast<long>(ki) * p.dilation;
                long xx = static_cast<long>(ox) * p.stride - p.pad + static_cast<long>(kj) * p.dilation;
                if (yy < 0 || yy >= ih || xx < 0 || xx >= iw) continue;
                acc += x.at(n, c, yy, xx) * w.at(o, c, ki, kj);
              }
          y.at(n, o, oy, ox) = acc + b[o];
        }
  return y;
}

inline void naive_conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, kernels::Conv2dParams p,
                                  Tensor& dx, Tensor& dw, Tensor& db) {
  dx = Tensor(x.shape());
  dw = Tensor(w.shape());
  db = Tensor({w.dim(0)});
  const long ih = static_cast<long>(x.dim(2)), iw = static_cast<long>(x.dim(3));
  for (std::size_t n = 0; n < dy.dim(0); ++n)
    for (std::size_t o = 0; o < dy.dim(1); ++o)
      for (std::size_t oy = 0; oy < dy.dim(2); ++oy)
        for (std::size_t ox = 0; ox < dy.dim(3); ++ox) {
          double g = dy.at(n, o, oy, ox);
          db[o] += g;
          for (std::size_t c = 0; c < x.dim(1); ++c)
            for (std::size_t ki = 0; ki < w.dim(2); ++ki)
              for (std::size_t kj = 0; kj < w.dim(3); ++kj) {
                long yy = static_cast<long>(oy) * p.stride - p.pad + static_cast<long>(ki) * p.dilation;
                long xx = static_cast<long>(ox) * p.stride - p.pad + static_cast<long>(kj) * p.dilation;
                if (yy < 0 || yy >= ih || xx < 0 || xx >= iw) continue;
                dx.at(n, c, yy, xx) += g * w.at(o, c, ki, kj);
                dw.at(o, c, ki, kj) += g * x.at(n, c, yy, xx);
              }
        }
}

// A small random composition of the differentiable ops, ending in a scalar.
struct RandomGraph {
  GraphBuilder build;
  std::vector<NamedTensor> params;
  std::string description;
};

inline RandomGraph random_graph(Rng& rng, int index) {
  enum Op { kConv, kRelu, kPool, kUpsample, kDropout, kConcat, kScale };
  struct Step {
    Op op;
    kernels::Conv2dParams conv{};
    std::size_t param = 0;  // index of the weight; bias follows
    int k = 2, stride = 2, pad = 0;
  };

  RandomGraph g;
  const std::size_t batch = 1 + rng.below(2);
  std::size_t c = 1 + rng.below(3);
  std::size_t h = 4 + rng.below(4), w = 4 + rng.below(4);
  Tensor x = random_tensor({batch, c, h, w}, rng);

  auto add_conv = [&](std::vector<Step>& steps, std::size_t out_c) {
    Step s{kConv};
    s.conv.stride = 1 + static_cast<int>(rng.below(2));
    s.conv.dilation = 1 + static_cast<int>(rng.below(2));
    std::size_t k = 1 + rng.below(3);
    while (s.conv.dilation * (static_cast<long>(k) - 1) + 1 > static_cast<long>(std::min(h, w))) --k;
    s.conv.pad = static_cast<int>(rng.below(2));
    s.param = g.params.size();
    g.params.push_back({"w" + std::to_string(steps.size()), random_tensor({out_c, c, k, k}, rng)});
    g.params.push_back({"b" + std::to_string(steps.size()), random_tensor({out_c}, rng)});
    Shape ys = conv_shape({batch, c, h, w}, {out_c, c, k, k}, s.conv);
    c = out_c;
    h = ys[2];
    w = ys[3];
    steps.push_back(s);
    g.description += "conv" + std::to_string(k) + "s" + std::to_string(s.conv.stride) + "d" +
                     std::to_string(s.conv.dilation) + " ";
  };

  std::vector<Step> steps;
  add_conv(steps, 1 + rng.below(3));
  const std::size_t depth = 1 + rng.below(4);
  for (std::size_t i = 0; i < depth; ++i) {
    switch (rng.below(7)) {
      case 0:
        if (h >= 2 && w >= 2) {
          add_conv(steps, 1 + rng.below(3));
        }
        break;
      case 1:
        steps.push_back({kRelu});
        g.description += "relu ";
        break;
      case 2:
        if (h >= 2 && w >= 2) {
          Step s{kPool};
          h = (h - 2) / 2 + 1;
          w = (w - 2) / 2 + 1;
          steps.push_back(s);
          g.description += "pool ";
        }
        break;
      case 3:
        if (h * w <= 36) {
          Step s{kUpsample};
          s.k = 2;
          h *= 2;
          w *= 2;
          steps.push_back(s);
          g.description += "up2 ";
        }
        break;
      case 4: {
        Step s{kDropout};
        s.param = rng.next();
        steps.push_back(s);
        g.description += "dropout ";
        break;
      }
      case 5: {
        steps.push_back({kConcat});
        c *= 2;
        g.description += "concat ";
        break;
      }
      default:
        steps.push_back({kScale});
        g.description += "scale ";
        break;
    }
  }
  // Final projection to two channels for the softmax head.
  Step head{kConv};
  head.param = g.params.size();
  g.params.push_back({"head_w", random_tensor({2, c, 1, 1}, rng)});
  g.params.push_back({"head_b", random_tensor({2}, rng)});
  const bool softmax = rng.below(2) == 0;
  Tensor labels({batch, h, w});
  for (double& v : labels.storage()) v = static_cast<double>(rng.below(2));
  Tensor coeffs = random_tensor({batch, 2, h, w}, rng);
  g.description += softmax ? "softmax" : "dot";
  (void)index;

  g.build = [=](Tape& tape, std::span<const Var> p) {
    Var y = tape.constant(x);
    for (const Step& s : steps) {
      switch (s.op) {
        case kConv:
          y = conv2d(tape, y, p[s.param], p[s.param + 1], s.conv);
          break;
        case kRelu:
          y = relu(tape, y);
          break;
        case kPool:
          y = maxpool2d(tape, y, 2, 2, 0);
          break;
        case kUpsample:
          y = bilinear_upsample(tape, y, s.k);
          break;
        case kDropout: {
          Rng local(s.param);
          y = dropout(tape, y, 0.3, true, local);
          break;
        }
        case kConcat: {
          Var parts[] = {y, scale(tape, y, -0.5)};
          y = concat_channels(tape, parts);
          break;
        }
        case kScale:
          y = add(tape, scale(tape, y, 1.5), y);
          break;
      }
    }
    y = conv2d(tape, y, p[head.param], p[head.param + 1], {});
    if (softmax) return softmax_loss(tape, y, labels).loss;
    return dot(tape, y, coeffs);
  };
  return g;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("egonet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace egonet::testutil
