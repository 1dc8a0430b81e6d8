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

#include "egonet/dhg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egonet/error.hpp"

namespace egonet::dhg {

void StereoCalib::validate() const {
  if (!(focal_px > 0.0)) throw ShapeError("calibration focal length must be positive");
  if (!(baseline_m > 0.0)) throw ShapeError("calibration baseline must be positive");
  if (!(camera_height_m >= 0.0)) throw ShapeError("calibration camera height must be >= 0");
}

namespace {

enum Move : std::uint8_t { kMatch = 0, kLeftOcc = 1, kRightOcc = 2 };

}  // namespace

ScanlineResult scanline_dp(const std::vector<double>& left, const std::vector<double>& right,
                           const ScanlineOptions& options) {
  const std::size_t n = left.size();
  if (right.size() != n) throw ShapeError("scanline lengths differ");
  if (options.max_disparity < 1) throw ShapeError("max disparity must be >= 1");
  if (static_cast<std::size_t>(options.max_disparity) >= n) {
    throw ShapeError("max disparity " + std::to_string(options.max_disparity) +
                     " must be smaller than the image width " + std::to_string(n));
  }
  const double occ = options.occlusion_cost;
  const long dmax = options.max_disparity;
  const std::size_t stride = n + 1;
  // cost[i][j]: best cost having consumed i left and j right pixels.
  std::vector<double> cost(stride * stride, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> move(stride * stride, kMatch);
  cost[0] = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= n; ++j) {
      if (i == 0 && j == 0) continue;
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t how = kMatch;
      const long d = static_cast<long>(i) - static_cast<long>(j);
      // Preference on ties: match, then whichever occlusion moves toward a
      // smaller disparity when read left to right.
      if (i > 0 && j > 0 && d >= 0 && d <= dmax) {
        best = cost[(i - 1) * stride + (j - 1)] + std::abs(left[i - 1] - right[j - 1]);
      }
      if (j > 0) {
        const double c = cost[i * stride + (j - 1)] + occ;
        if (c < best) {
          best = c;
          how = kRightOcc;
        }
      }
      if (i > 0) {
        const double c = cost[(i - 1) * stride + j] + occ;
        if (c < best) {
          best = c;
          how = kLeftOcc;
        }
      }
      cost[i * stride + j] = best;
      move[i * stride + j] = how;
    }
  }
  ScanlineResult r;
  r.cost = cost[n * stride + n];
  r.disparity.assign(n, -1);
  std::size_t i = n, j = n;
  while (i > 0 || j > 0) {
    switch (move[i * stride + j]) {
      case kMatch:
        r.disparity[i - 1] = static_cast<int>(i) - static_cast<int>(j);
        --i;
        --j;
        break;
      case kLeftOcc:
        --i;
        break;
      default:
        --j;
        break;
    }
  }
  return r;
}

DisparityMap scanline_disparity(const Image& left, const Image& right,
                                const ScanlineOptions& options) {
  if (left.channels != 1 || right.channels != 1) {
    throw ShapeError("stereo matching expects single-channel images");
  }
  if (left.height != right.height || left.width != right.width) {
    throw ShapeError("stereo pair sizes differ");
  }
  DisparityMap out(left.height, left.width);
  std::vector<double> l(left.width), r(left.width);
  for (std::size_t y = 0; y < left.height; ++y) {
    for (std::size_t x = 0; x < left.width; ++x) {
      l[x] = left.at(0, y, x);
      r[x] = right.at(0, y, x);
    }
    const auto row = scanline_dp(l, r, options);
    for (std::size_t x = 0; x < left.width; ++x) {
      if (row.disparity[x] >= 0) out.set(y, x, row.disparity[x]);
    }
  }
  return out;
}

DepthMap disparity_to_depth(const DisparityMap& disparity, const StereoCalib& calib) {
  calib.validate();
  DepthMap z(disparity.height, disparity.width);
  const double fb = calib.focal_px * calib.baseline_m;
  for (std::size_t y = 0; y < z.height; ++y) {
    for (std::size_t x = 0; x < z.width; ++x) {
      const double d = disparity.at(y, x);
      if (disparity.is_valid(y, x) && d > 0.0) z.set(y, x, fb / d);
    }
  }
  return z;
}

DisparityMap depth_to_disparity(const DepthMap& depth, const StereoCalib& calib) {
  calib.validate();
  DisparityMap d(depth.height, depth.width);
  const double fb = calib.focal_px * calib.baseline_m;
  for (std::size_t y = 0; y < d.height; ++y) {
    for (std::size_t x = 0; x < d.width; ++x) {
      if (depth.is_valid(y, x) && depth.at(y, x) > 0.0) d.set(y, x, fb / depth.at(y, x));
    }
  }
  return d;
}

HeightMap depth_to_height(const DepthMap& depth, const StereoCalib& calib) {
  calib.validate();
  HeightMap h(depth.height, depth.width);
  const double c = std::cos(calib.pitch_rad), s = std::sin(calib.pitch_rad);
  for (std::size_t v = 0; v < h.height; ++v) {
    for (std::size_t u = 0; u < h.width; ++u) {
      if (!depth.is_valid(v, u)) continue;
      const double z = depth.at(v, u);
      const double y = (static_cast<double>(v) - calib.cy) * z / calib.focal_px;
      // Downward component after undoing the pitch.
      const double down = y * c + z * s;
      h.set(v, u, calib.camera_height_m - down);
    }
  }
  return h;
}

DepthMap render_ground_depth(std::size_t height, std::size_t width, const StereoCalib& calib) {
  calib.validate();
  DepthMap z(height, width);
  const double c = std::cos(calib.pitch_rad), s = std::sin(calib.pitch_rad);
  for (std::size_t v = 0; v < height; ++v) {
    const double denom = (static_cast<double>(v) - calib.cy) / calib.focal_px * c + s;
    if (denom <= 0.0) continue;
    const double depth = calib.camera_height_m / denom;
    for (std::size_t u = 0; u < width; ++u) z.set(v, u, depth);
  }
  return z;
}

Image to_grayscale(const Image& rgb) {
  if (rgb.channels != 3) throw ShapeError("to_grayscale expects 3 channels");
  Image g(1, rgb.height, rgb.width);
  for (std::size_t y = 0; y < rgb.height; ++y) {
    for (std::size_t x = 0; x < rgb.width; ++x) {
      g.at(0, y, x) = 0.299 * rgb.at(0, y, x) + 0.587 * rgb.at(1, y, x) + 0.114 * rgb.at(2, y, x);
    }
  }
  return g;
}

namespace {

double normalize(double v, double lo, double hi) {
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

}  // namespace

DhgImage assemble_dhg(const DepthMap& depth, const HeightMap& height, const Image& gray,
                      const DhgBounds& bounds) {
  if (depth.height != height.height || depth.width != height.width || gray.channels != 1 ||
      gray.height != depth.height || gray.width != depth.width) {
    throw ShapeError("assemble_dhg inputs differ in size");
  }
  if (!(bounds.depth_max > bounds.depth_min) || !(bounds.height_max > bounds.height_min)) {
    throw ShapeError("DHG normalization bounds must be increasing");
  }
  DhgImage out{Image(3, depth.height, depth.width), std::vector<std::uint8_t>(depth.values.size(), 0),
               bounds};
  for (std::size_t y = 0; y < depth.height; ++y) {
    for (std::size_t x = 0; x < depth.width; ++x) {
      const std::size_t i = y * depth.width + x;
      if (depth.is_valid(y, x) && height.is_valid(y, x)) {
        out.channels.at(0, y, x) = normalize(depth.at(y, x), bounds.depth_min, bounds.depth_max);
        out.channels.at(1, y, x) = normalize(height.at(y, x), bounds.height_min, bounds.height_max);
      } else {
        out.invalid[i] = 1;
      }
      out.channels.at(2, y, x) = std::clamp(gray.at(0, y, x), 0.0, 1.0);
    }
  }
  return out;
}

DepthMap decode_depth(const DhgImage& dhg) {
  DepthMap z(dhg.channels.height, dhg.channels.width);
  const auto& b = dhg.bounds;
  for (std::size_t y = 0; y < z.height; ++y) {
    for (std::size_t x = 0; x < z.width; ++x) {
      if (dhg.invalid[y * z.width + x]) continue;
      z.set(y, x, b.depth_min + dhg.channels.at(0, y, x) * (b.depth_max - b.depth_min));
    }
  }
  return z;
}

}  // namespace egonet::dhg
