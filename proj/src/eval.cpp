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

#include "egonet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "egonet/error.hpp"

namespace egonet::eval {

std::vector<double> uniform_thresholds(std::size_t n) {
  if (n < 2) throw ShapeError("threshold grid needs at least 2 points");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

namespace {

void check_pairs(std::span<const Tensor> predictions, std::span<const Tensor> masks) {
  if (predictions.size() != masks.size()) {
    throw ShapeError("got " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(masks.size()) + " masks");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].shape() != masks[i].shape()) {
      throw ShapeError("prediction " + shape_string(predictions[i].shape()) + " and mask " +
                       shape_string(masks[i].shape()) + " differ in size (image " + std::to_string(i) + ")");
    }
  }
}

struct Counts {
  std::vector<std::uint64_t> tp, fp;
  std::uint64_t positives = 0;
};

// Counts for sorted ascending thresholds: pixel p is positive at every t <= p.
Counts count(const Tensor& pred, const Tensor& mask, std::span<const double> thresholds) {
  Counts c;
  const std::size_t n = thresholds.size();
  std::vector<std::uint64_t> pos_hist(n + 1, 0), neg_hist(n + 1, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    // Number of thresholds <= p.
    const auto k = static_cast<std::size_t>(
        std::upper_bound(thresholds.begin(), thresholds.end(), pred[i]) - thresholds.begin());
    if (mask[i] != 0.0) {
      ++pos_hist[k];
      ++c.positives;
    } else {
      ++neg_hist[k];
    }
  }
  c.tp.assign(n, 0);
  c.fp.assign(n, 0);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t k = n; k-- > 0;) {
    tp += pos_hist[k + 1];
    fp += neg_hist[k + 1];
    c.tp[k] = tp;
    c.fp[k] = fp;
  }
  return c;
}

double precision_of(std::uint64_t tp, std::uint64_t fp) {
  return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall_of(std::uint64_t tp, std::uint64_t positives) {
  return positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
}

}  // namespace

PRCurve pr_curve(std::span<const Tensor> predictions, std::span<const Tensor> masks,
                 std::span<const double> thresholds, Pooling pooling) {
  check_pairs(predictions, masks);
  if (thresholds.empty()) throw ShapeError("threshold list is empty");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw ShapeError("thresholds must be ascending");
  }
  const std::size_t n = thresholds.size();
  PRCurve curve;
  curve.thresholds.assign(thresholds.begin(), thresholds.end());
  curve.tp.assign(n, 0);
  curve.fp.assign(n, 0);
  curve.fn.assign(n, 0);
  curve.precision.assign(n, 0.0);
  curve.recall.assign(n, 0.0);

  std::uint64_t positives = 0;
  for (std::size_t img = 0; img < predictions.size(); ++img) {
    const Counts c = count(predictions[img], masks[img], thresholds);
    positives += c.positives;
    for (std::size_t k = 0; k < n; ++k) {
      curve.tp[k] += c.tp[k];
      curve.fp[k] += c.fp[k];
      curve.fn[k] += c.positives - c.tp[k];
      if (pooling == Pooling::kPerImage) {
        curve.precision[k] += precision_of(c.tp[k], c.fp[k]);
        curve.recall[k] += recall_of(c.tp[k], c.positives);
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (pooling == Pooling::kPerImage) {
      const double m = predictions.empty() ? 1.0 : static_cast<double>(predictions.size());
      curve.precision[k] /= m;
      curve.recall[k] /= m;
    } else {
      curve.precision[k] = precision_of(curve.tp[k], curve.fp[k]);
      curve.recall[k] = recall_of(curve.tp[k], positives);
    }
  }
  return curve;
}

PRCurve pr_curve_exact(std::span<const Tensor> predictions, std::span<const Tensor> masks) {
  std::vector<double> values;
  for (const auto& p : predictions) values.insert(values.end(), p.data().begin(), p.data().end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.empty()) throw ShapeError("no predictions to evaluate");
  return pr_curve(predictions, masks, values);
}

double max_f_score(const PRCurve& curve) {
  if (curve.size() == 0) throw ShapeError("empty precision-recall curve");
  double best = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double p = curve.precision[k], r = curve.recall[k];
    if (p + r > 0.0) best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double average_precision(const PRCurve& curve, ApRule rule) {
  const std::size_t n = curve.size();
  if (n == 0) throw ShapeError("empty precision-recall curve");
  std::vector<double> p = curve.precision;
  if (rule == ApRule::kInterpolated) {
    // Ascending thresholds means descending recall: running max from index 0.
    for (std::size_t k = 1; k < n; ++k) p[k] = std::max(p[k], p[k - 1]);
  }
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double next = k + 1 < n ? curve.recall[k + 1] : 0.0;
    ap += (curve.recall[k] - next) * p[k];
  }
  return ap;
}

Tensor aop_baseline(std::span<const Tensor> masks, std::size_t height, std::size_t width) {
  if (masks.empty()) throw ShapeError("AOP baseline needs at least one training mask");
  for (const auto& m : masks) {
    if (m.rank() != 2) throw ShapeError("masks must be H x W, got " + shape_string(m.shape()));
  }
  if (height == 0 || width == 0) {
    height = masks[0].dim(0);
    width = masks[0].dim(1);
  }
  Tensor sum(Shape{height, width});
  for (const auto& m : masks) {
    const std::size_t mh = m.dim(0), mw = m.dim(1);
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = mh == height ? y : std::min(mh - 1, y * mh / height);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sx = mw == width ? x : std::min(mw - 1, x * mw / width);
        sum[y * width + x] += m[sy * mw + sx];
      }
    }
  }
  for (auto& v : sum.data()) v /= static_cast<double>(masks.size());
  return sum;
}

Tensor center_prior(std::size_t height, std::size_t width, double sigma_frac) {
  if (!(sigma_frac > 0.0)) throw ShapeError("center prior sigma fraction must be positive");
  const double sigma = sigma_frac * std::hypot(static_cast<double>(height), static_cast<double>(width));
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  Tensor t(Shape{height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      t[y * width + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return t;
}

Tensor point_to_mask(double x, double y, double width, std::size_t height, std::size_t image_width) {
  if (!(width > 0.0)) throw ShapeError("Gaussian width must be positive");
  if (x < 0.0 || y < 0.0 || x > static_cast<double>(image_width - 1) || y > static_cast<double>(height - 1)) {
    throw ShapeError("point lies outside the image");
  }
  const double sigma = width / 2.0;
  Tensor t(Shape{height, image_width});
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < image_width; ++c) {
      const double dy = static_cast<double>(r) - y, dx = static_cast<double>(c) - x;
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      t[r * image_width + c] = v < 1e-4 ? 0.0 : v;
    }
  }
  return t;
}

Tensor constant_map(std::size_t height, std::size_t width, double value) {
  return Tensor(Shape{height, width}, value);
}

EvalReport make_report(std::vector<SceneScore> scenes) {
  EvalReport r;
  r.scenes = std::move(scenes);
  if (!r.scenes.empty()) {
    for (const auto& s : r.scenes) {
      r.mean_mf += s.mf;
      r.mean_ap += s.ap;
    }
    r.mean_mf /= static_cast<double>(r.scenes.size());
    r.mean_ap /= static_cast<double>(r.scenes.size());
  }
  return r;
}

SceneScore score_scene(const std::string& scene, std::span<const Tensor> predictions,
                       std::span<const Tensor> masks, std::span<const double> thresholds,
                       Pooling pooling) {
  SceneScore s;
  s.scene = scene;
  s.frames = predictions.size();
  s.curve = pr_curve(predictions, masks, thresholds, pooling);
  s.mf = max_f_score(s.curve);
  s.ap = average_precision(s.curve);
  return s;
}

EvalReport evaluate_splits(const std::vector<train::Split>& splits,
                           const std::function<std::vector<Sample>(const std::string& scene)>& scene_samples,
                           const Method& method, std::span<const double> thresholds,
                           Pooling pooling) {
  std::vector<SceneScore> scores;
  for (const auto& split : splits) {
    std::vector<Sample> train_set;
    for (const auto& id : split.train) {
      auto s = scene_samples(id);
      std::move(s.begin(), s.end(), std::back_inserter(train_set));
    }
    const std::vector<Sample> test_set = scene_samples(split.test);
    if (test_set.empty()) throw DataError("held-out scene " + split.test + " has no frames");
    const std::vector<Tensor> preds = method(train_set, test_set);
    if (preds.size() != test_set.size()) throw ShapeError("method returned the wrong number of maps");
    std::vector<Tensor> masks;
    masks.reserve(test_set.size());
    for (const auto& s : test_set) masks.push_back(s.label);
    scores.push_back(score_scene(split.test, preds, masks, thresholds, pooling));
  }
  return make_report(std::move(scores));
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "scene,MF,AP\n";
  for (const auto& s : report.scenes) out << s.scene << ',' << s.mf << ',' << s.ap << '\n';
  out << "mean," << report.mean_mf << ',' << report.mean_ap << '\n';
}

void write_curves_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "scene,threshold,precision,recall,tp,fp,fn\n";
  for (const auto& s : report.scenes) {
    const auto& c = s.curve;
    for (std::size_t k = 0; k < c.size(); ++k) {
      out << s.scene << ',' << c.thresholds[k] << ',' << c.precision[k] << ',' << c.recall[k] << ','
          << c.tp[k] << ',' << c.fp[k] << ',' << c.fn[k] << '\n';
    }
  }
}

void write_pr_svg(const std::filesystem::path& path, std::span<const NamedCurve> curves) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  constexpr double size = 400.0, margin = 50.0;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin + 160
      << "\" height=\"" << size + 2 * margin << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin + size / 2 << "\" y=\"" << size + margin + 35
      << "\" text-anchor=\"middle\" font-size=\"14\">recall</text>\n";
  out << "<text x=\"15\" y=\"" << margin + size / 2 << "\" font-size=\"14\" transform=\"rotate(-90 15 "
      << margin + size / 2 << ")\" text-anchor=\"middle\">precision</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    const auto& c = curves[i].curve;
    for (std::size_t k = 0; k < c.size(); ++k) {
      out << margin + c.recall[k] * size << ',' << margin + (1.0 - c.precision[k]) * size << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << size + margin + 10 << "\" y=\"" << margin + 15 + 18 * static_cast<double>(i)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << curves[i].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace egonet::eval
