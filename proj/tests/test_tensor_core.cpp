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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "egonet/autograd.hpp"
#include "egonet/error.hpp"
#include "egonet/gradcheck.hpp"
#include "egonet/kernels.hpp"
#include "egonet/rng.hpp"
#include "test_util.hpp"

namespace egonet {
namespace {

using kernels::Conv2dParams;
using testutil::naive_conv2d;
using testutil::random_tensor;

TEST(Tensor, ConstructionAndShape) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(shape_string(t.shape()), "[2x3]");
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(t.reshaped({4}), ShapeError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  Tensor u({2, 3}, 0.5);
  t += u;
  EXPECT_EQ(t[4], 2.0);
  EXPECT_THROW(t += Tensor({6}), ShapeError);
}

TEST(Tensor, CsvDump) {
  Tensor t({1, 2}, std::vector<double>{0.5, -1});
  std::ostringstream out;
  write_csv(t, out);
  EXPECT_EQ(out.str(), "0,0,0.5\n0,1,-1\n");
}

TEST(Conv2d, ScalarScaling) {
  Tensor x({1, 1, 3, 3}, 1.0);
  Tensor w({1, 1, 1, 1}, 2.0);
  Tensor b({1}, 0.0);
  Tensor y = kernels::conv2d(x, w, b, {});
  EXPECT_EQ(y, Tensor({1, 1, 3, 3}, 2.0));
}

TEST(Conv2d, HandSum) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w({1, 1, 2, 2}, {1, 0, 0, 1});
  Tensor y = kernels::conv2d(x, w, Tensor({1}, 0.0), {});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 5.0);
}

TEST(Conv2d, DilatedShape) {
  Shape s = kernels::conv2d_output_shape({1, 1, 5, 5}, {1, 1, 3, 3}, {1, 2, 2});
  EXPECT_EQ(s, (Shape{1, 1, 5, 5}));
}

TEST(Conv2d, MismatchNamesBothShapes) {
  try {
    kernels::conv2d_output_shape({1, 3, 5, 5}, {2, 4, 3, 3}, {});
    FAIL();
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3x5x5]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x4x3x3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(kernels::conv2d_output_shape({1, 1, 5, 5}, {1, 1, 3, 3}, {0, 0, 1}), ShapeError);
  EXPECT_THROW(kernels::conv2d_output_shape({1, 1, 5, 5}, {1, 1, 3, 3}, {1, -1, 1}), ShapeError);
  EXPECT_THROW(kernels::conv2d_output_shape({1, 1, 5, 5}, {1, 1, 3, 3}, {1, 0, 0}), ShapeError);
}

TEST(Conv2d, ShapeFormulaProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
    std::size_t kh = 1 + rng.below(4), kw = 1 + rng.below(4);
    Conv2dParams p{1 + static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)),
                   1 + static_cast<int>(rng.below(3))};
    long eh = static_cast<long>(h) + 2 * p.pad - p.dilation * (static_cast<long>(kh) - 1) - 1;
    long ew = static_cast<long>(w) + 2 * p.pad - p.dilation * (static_cast<long>(kw) - 1) - 1;
    if (eh < 0 || ew < 0) {
      EXPECT_THROW(kernels::conv2d_output_shape({2, 3, h, w}, {4, 3, kh, kw}, p), ShapeError);
      continue;
    }
    Shape s = kernels::conv2d_output_shape({2, 3, h, w}, {4, 3, kh, kw}, p);
    EXPECT_EQ(s, (Shape{2, 4, static_cast<std::size_t>(eh / p.stride + 1),
                        static_cast<std::size_t>(ew / p.stride + 1)}));
  }
}

TEST(Conv2d, BitExactAgainstNaiveOracle) {
  Rng rng(2024);
  int strided = 0, dilated = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t b = 1 + rng.below(2), c = 1 + rng.below(4), o = 1 + rng.below(5);
    std::size_t kh = 1 + rng.below(3), kw = 1 + rng.below(3);
    Conv2dParams p{1 + static_cast<int>(trial % 2), static_cast<int>(rng.below(3)),
                   1 + static_cast<int>((trial / 2) % 2)};
    std::size_t h = p.dilation * (kh - 1) + 1 + rng.below(9);
    std::size_t w = p.dilation * (kw - 1) + 1 + rng.below(9);
    strided += p.stride > 1;
    dilated += p.dilation > 1;
    Tensor x = random_tensor({b, c, h, w}, rng);
    Tensor wt = random_tensor({o, c, kh, kw}, rng);
    Tensor bias = random_tensor({o}, rng);
    Tensor got = kernels::conv2d(x, wt, bias, p);
    Tensor want = naive_conv2d(x, wt, bias, p);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
      ASSERT_EQ(got[i], want[i]) << "trial " << trial << " element " << i;
    }
  }
  EXPECT_GT(strided, 0);
  EXPECT_GT(dilated, 0);
}

TEST(Conv2d, LargeChannelCountsMatchOracle) {
  Rng rng(7);
  Tensor x = random_tensor({2, 19, 11, 13}, rng);
  Tensor w = random_tensor({21, 19, 3, 3}, rng);
  Tensor b = random_tensor({21}, rng);
  Conv2dParams p{1, 2, 2};
  EXPECT_EQ(kernels::conv2d(x, w, b, p), naive_conv2d(x, w, b, p));
}

TEST(Conv2d, BackwardMatchesNaiveAdjoint) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Conv2dParams p{1 + trial % 2, trial % 3, 1 + (trial / 3) % 2};
    Tensor x = random_tensor({2, 3, 9, 8}, rng);
    Tensor w = random_tensor({4, 3, 3, 2}, rng);
    Tensor dy = random_tensor(kernels::conv2d_output_shape(x.shape(), w.shape(), p), rng);
    Tensor dx, dw, db;
    kernels::conv2d_backward(x, w, dy, p, &dx, &dw, &db);
    Tensor ndx, ndw, ndb;
    testutil::naive_conv2d_backward(x, w, dy, p, ndx, ndw, ndb);
    for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_NEAR(dx[i], ndx[i], 1e-12);
    for (std::size_t i = 0; i < dw.size(); ++i) EXPECT_NEAR(dw[i], ndw[i], 1e-12);
    for (std::size_t i = 0; i < db.size(); ++i) EXPECT_NEAR(db[i], ndb[i], 1e-12);
  }
}

TEST(Relu, Examples) {
  Tensor y = kernels::relu(Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(y, Tensor({3}, {0, 0, 2}));
}

TEST(MaxPool, WindowMax) {
  auto r = kernels::maxpool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2, 0);
  EXPECT_EQ(r.y, Tensor({1, 1, 1, 1}, 4.0));
}

TEST(MaxPool, PaddingIsNegativeInfinity) {
  Tensor x({1, 1, 2, 2}, -5.0);
  auto r = kernels::maxpool2d(x, 3, 1, 1);
  EXPECT_EQ(r.y, Tensor({1, 1, 2, 2}, -5.0));
}

TEST(MaxPool, ShapeFormulaProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t h = 2 + rng.below(12), w = 2 + rng.below(12);
    int k = 1 + static_cast<int>(rng.below(3));
    int s = 1 + static_cast<int>(rng.below(3));
    int pad = static_cast<int>(rng.below(static_cast<std::uint64_t>(k / 2 + 1)));
    if (h + 2 * pad < static_cast<std::size_t>(k) || w + 2 * pad < static_cast<std::size_t>(k)) {
      EXPECT_THROW(kernels::maxpool2d_output_shape({1, 2, h, w}, k, s, pad), ShapeError);
      continue;
    }
    Shape got = kernels::maxpool2d_output_shape({1, 2, h, w}, k, s, pad);
    EXPECT_EQ(got[2], (h + 2 * pad - k) / s + 1);
    EXPECT_EQ(got[3], (w + 2 * pad - k) / s + 1);
  }
}

TEST(Concat, OrderingAndErrors) {
  Tensor a({1, 2, 3, 3}, 1.0), b({1, 3, 3, 3}, 2.0);
  const Tensor* xs[] = {&a, &b};
  Tensor y = kernels::concat_channels(xs);
  ASSERT_EQ(y.shape(), (Shape{1, 5, 3, 3}));
  EXPECT_EQ(y.at(0, 1, 2, 2), 1.0);
  EXPECT_EQ(y.at(0, 2, 0, 0), 2.0);
  EXPECT_THROW(kernels::concat_channels(std::span<const Tensor* const>{}), ShapeError);
  Tensor c({1, 1, 2, 3});
  const Tensor* bad[] = {&a, &c};
  EXPECT_THROW(kernels::concat_channels(bad), ShapeError);
}

TEST(Upsample, Examples) {
  Tensor x({1, 1, 2, 2}, {0, 1, 0, 1});
  EXPECT_EQ(kernels::bilinear_upsample(x, 1), x);
  Tensor y = kernels::bilinear_upsample(x, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_DOUBLE_EQ(y.at(0, 0, r, 0), 0.0);
    EXPECT_NEAR(y.at(0, 0, r, 1), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(y.at(0, 0, r, 2), 2.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(y.at(0, 0, r, 3), 1.0);
  }
  Tensor c = kernels::bilinear_upsample(Tensor({2, 3, 3, 2}, 0.7), 8);
  for (double v : c.data()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(Upsample, CornersExact) {
  Rng rng(5);
  Tensor x = random_tensor({1, 2, 4, 5}, rng);
  Tensor y = kernels::bilinear_upsample(x, 8);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(y.at(0, c, 0, 0), x.at(0, c, 0, 0));
    EXPECT_EQ(y.at(0, c, 31, 39), x.at(0, c, 3, 4));
    EXPECT_EQ(y.at(0, c, 0, 39), x.at(0, c, 0, 4));
    EXPECT_EQ(y.at(0, c, 31, 0), x.at(0, c, 3, 0));
  }
}

TEST(SoftmaxLoss, EqualLogits) {
  auto r = kernels::softmax_loss(Tensor({2, 2, 3, 3}, 0.3), Tensor({2, 3, 3}, 1.0));
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  for (double p : r.probs.data()) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(SoftmaxLoss, DirectArithmetic) {
  auto r = kernels::softmax_loss(Tensor({1, 2, 1, 1}, {2, 0}), Tensor({1, 1, 1}, 0.0));
  double p0 = std::exp(2.0) / (std::exp(2.0) + 1.0);
  EXPECT_NEAR(r.probs[0], p0, 1e-15);
  EXPECT_NEAR(r.loss, -std::log(p0), 1e-15);
}

TEST(SoftmaxLoss, ShiftInvariant) {
  Rng rng(8);
  Tensor logits = random_tensor({1, 2, 4, 4}, rng);
  Tensor labels({1, 4, 4});
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<double>(rng.below(2));
  Tensor shifted = logits;
  for (double& v : shifted.storage()) v += 1000.0;
  auto a = kernels::softmax_loss(logits, labels);
  auto b = kernels::softmax_loss(shifted, labels);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (std::size_t i = 0; i < a.probs.size(); ++i) EXPECT_NEAR(a.probs[i], b.probs[i], 1e-12);
}

TEST(SoftmaxLoss, RejectsBadLabels) {
  EXPECT_THROW(kernels::softmax_loss(Tensor({1, 2, 1, 1}), Tensor({1, 1, 1}, 2.0)), ShapeError);
  EXPECT_THROW(kernels::softmax_loss(Tensor({1, 2, 1, 1}), Tensor({1, 1, 1}, 0.5)), ShapeError);
}

TEST(Tape, TopologicalOrderAndGradientShapes) {
  Rng rng(1);
  Tape tape;
  Var x = tape.constant(random_tensor({1, 2, 6, 6}, rng));
  Var w = tape.leaf(random_tensor({3, 2, 3, 3}, rng));
  Var b = tape.leaf(random_tensor({3}, rng));
  Var y = relu(tape, conv2d(tape, x, w, b, {1, 1, 1}));
  Var loss = sum(tape, y);
  EXPECT_LT(w.id, y.id);
  EXPECT_LT(y.id, loss.id);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(w).shape(), tape.value(w).shape());
  EXPECT_EQ(tape.grad(b).shape(), tape.value(b).shape());
  EXPECT_FALSE(tape.has_grad(x));
}

TEST(Tape, SumOfReluGivesOnes) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}, 0.7));
  tape.backward(sum(tape, relu(tape, x)));
  EXPECT_EQ(tape.grad(x), Tensor({2, 3}, 1.0));
}

TEST(Tape, SoftmaxGradientAtEqualLogits) {
  Tape tape;
  Tensor labels({2, 2, 3});
  for (std::size_t i = 0; i < labels.size(); i += 2) labels[i] = 1.0;
  Var logits = tape.leaf(Tensor({2, 2, 2, 3}, 0.0));
  auto out = softmax_loss(tape, logits, labels);
  tape.backward(out.loss);
  const Tensor& g = tape.grad(logits);
  const double n = 12.0;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 3; ++x) {
        double label = labels[(b * 2 + y) * 3 + x];
        EXPECT_DOUBLE_EQ(g.at(b, 1, y, x), (0.5 - label) / n);
        EXPECT_DOUBLE_EQ(g.at(b, 0, y, x), (0.5 - (1.0 - label)) / n);
      }
}

TEST(Tape, SecondBackwardRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  Var loss = sum(tape, x);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), std::logic_error);
}

TEST(Tape, NonScalarBackwardRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(relu(tape, x)), ShapeError);
}

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  Rng rng(4);
  Tensor v = random_tensor({1, 3, 4, 4}, rng);
  for (bool training : {false, true}) {
    Tape tape;
    Var x = tape.leaf(v);
    EXPECT_EQ(tape.value(dropout(tape, x, 0.0, training, rng)), v);
  }
  Tape tape;
  Var x = tape.leaf(v);
  EXPECT_EQ(tape.value(dropout(tape, x, 0.5, false, rng)), v);
}

TEST(Dropout, InvertedScalingMean) {
  Rng rng(12345);
  Tape tape;
  Var x = tape.leaf(Tensor({100000}, 1.0));
  const Tensor& y = tape.value(dropout(tape, x, 0.5, true, rng));
  double mean = 0.0;
  for (double v : y.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  EXPECT_NEAR(mean, 1.0, 0.01);
}

TEST(Dropout, SeededMasksAreBitIdentical) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tape tape;
    Var x = tape.leaf(Tensor({1, 2, 8, 8}, 1.0));
    Var y = dropout(tape, x, 0.5, true, rng);
    Var loss = sum_squares(tape, y);
    tape.backward(loss);
    return std::make_pair(tape.value(loss)[0], tape.grad(x));
  };
  auto a = run(77), b = run(77), c = run(78);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.second, c.second);
}

TEST(Dropout, BackwardUsesRecordedMask) {
  Rng rng(9);
  Tape tape;
  Var x = tape.leaf(Tensor({64}, 3.0));
  Var y = dropout(tape, x, 0.25, true, rng);
  tape.backward(sum(tape, y));
  const Tensor& out = tape.value(y);
  const Tensor& g = tape.grad(x);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_DOUBLE_EQ(g[i], out[i] / 3.0);
}

TEST(GradCheck, LinearGraphIsExact) {
  Rng rng(10);
  Tensor coeffs = random_tensor({5}, rng);
  auto report = grad_check(
      [&](Tape& tape, std::span<const Var> p) { return dot(tape, p[0], coeffs); },
      {{"w", random_tensor({5}, rng)}});
  EXPECT_LT(report.max_rel_error(), 1e-9);
  EXPECT_TRUE(report.passed());
}

TEST(GradCheck, ConvReluOnFourByFour) {
  Rng rng(13);
  Tensor x = random_tensor({1, 2, 4, 4}, rng);
  Tensor coeffs = random_tensor({1, 3, 4, 4}, rng);
  auto report = grad_check(
      [&](Tape& tape, std::span<const Var> p) {
        Var in = tape.constant(x);
        return dot(tape, relu(tape, conv2d(tape, in, p[0], p[1], {1, 1, 1})), coeffs);
      },
      {{"w", random_tensor({3, 2, 3, 3}, rng)}, {"b", random_tensor({3}, rng)}}, {1e-5, 1e-4});
  EXPECT_LT(report.max_rel_error(), 1e-4);
}

TEST(GradCheck, InferenceDropoutHasNoEffect) {
  Rng rng(14);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tensor coeffs = random_tensor({1, 2, 5, 5}, rng);
  std::vector<NamedTensor> params = {{"w", random_tensor({2, 2, 3, 3}, rng)},
                                     {"b", random_tensor({2}, rng)}};
  auto build = [&](bool with_dropout) {
    return [&, with_dropout](Tape& tape, std::span<const Var> p) {
      Rng local(3);
      Var y = relu(tape, conv2d(tape, tape.constant(x), p[0], p[1], {1, 1, 1}));
      if (with_dropout) y = dropout(tape, y, 0.5, false, local);
      return dot(tape, y, coeffs);
    };
  };
  auto a = grad_check(build(false), params);
  auto b = grad_check(build(true), params);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].max_rel_error, b.entries[i].max_rel_error);
  }
}

TEST(GradCheck, RandomGraphs) {
  Rng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    auto g = testutil::random_graph(rng, trial);
    auto report = grad_check(g.build, g.params, {1e-5, 1e-4});
    worst = std::max(worst, report.max_rel_error());
    EXPECT_TRUE(report.passed()) << "graph " << trial << ": " << g.description << " max rel err "
                                 << report.max_rel_error();
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

}  // namespace
}  // namespace egonet
