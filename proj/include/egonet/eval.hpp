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
#include <span>
#include <string>
#include <vector>

#include "egonet/sample.hpp"
#include "egonet/tensor.hpp"
#include "egonet/trainer.hpp"

// Threshold-swept precision/recall evaluation of action-object probability
// maps. Maps and masks are H x W tensors; masks hold 0 or 1.
namespace egonet::eval {

/// Precision/recall pairs at ascending thresholds.
///
/// A pixel with probability p is predicted positive at threshold t iff p >= t.
/// Precision is 1 when nothing is predicted positive; recall is 0 when the
/// ground truth is empty.
struct PRCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::uint64_t> tp, fp, fn;

  std::size_t size() const { return thresholds.size(); }
};

enum class Pooling {
  kDataset,   // counts summed over every pixel of every image
  kPerImage,  // precision and recall averaged over images at each threshold
};

// 0.00, 0.01, ..., 1.00 for n = 101.
std::vector<double> uniform_thresholds(std::size_t n = 101);

PRCurve pr_curve(std::span<const Tensor> predictions, std::span<const Tensor> masks,
                 std::span<const double> thresholds, Pooling pooling = Pooling::kDataset);

// Thresholds at every distinct predicted value.
PRCurve pr_curve_exact(std::span<const Tensor> predictions, std::span<const Tensor> masks);

// max over thresholds of 2PR / (P + R), with F = 0 when P + R = 0.
double max_f_score(const PRCurve& curve);

enum class ApRule {
  kStep,          // sum of (R_i - R_{i+1}) * P_i over descending recall
  kInterpolated,  // same, with P_i replaced by the max precision at recall >= R_i
};
double average_precision(const PRCurve& curve, ApRule rule = ApRule::kStep);

// Per-pixel mean of the training masks, resized by nearest neighbour to
// height x width when they differ (0 keeps the first mask's size).
Tensor aop_baseline(std::span<const Tensor> masks, std::size_t height = 0, std::size_t width = 0);

// Unnormalized Gaussian centred on the image, sigma = sigma_frac * diagonal.
Tensor center_prior(std::size_t height, std::size_t width, double sigma_frac = 0.25);

// Gaussian of sigma = width / 2 at (x, y), values below 1e-4 set to 0.
Tensor point_to_mask(double x, double y, double width, std::size_t height, std::size_t image_width);

Tensor constant_map(std::size_t height, std::size_t width, double value);

struct SceneScore {
  std::string scene;
  std::size_t frames = 0;
  double mf = 0.0;
  double ap = 0.0;
  PRCurve curve;
};

struct EvalReport {
  std::vector<SceneScore> scenes;
  double mean_mf = 0.0;
  double mean_ap = 0.0;
};

// Fills the means as arithmetic means of the per-scene scores.
EvalReport make_report(std::vector<SceneScore> scenes);

SceneScore score_scene(const std::string& scene, std::span<const Tensor> predictions,
                       std::span<const Tensor> masks, std::span<const double> thresholds,
                       Pooling pooling = Pooling::kDataset);

// Produces one probability map per test sample, given the training samples.
using Method = std::function<std::vector<Tensor>(std::span<const Sample> train,
                                                 std::span<const Sample> test)>;

// For each split: fit on the train scenes, score the held-out scene.
EvalReport evaluate_splits(const std::vector<train::Split>& splits,
                           const std::function<std::vector<Sample>(const std::string& scene)>& scene_samples,
                           const Method& method, std::span<const double> thresholds,
                           Pooling pooling = Pooling::kDataset);

void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
void write_curves_csv(const std::filesystem::path& path, const EvalReport& report);

struct NamedCurve {
  std::string label;
  PRCurve curve;
};
// Precision-recall polylines as a standalone SVG document.
void write_pr_svg(const std::filesystem::path& path, std::span<const NamedCurve> curves);

}  // namespace egonet::eval
