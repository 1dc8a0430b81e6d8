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
#include <cstdint>
#include <vector>

#include "egonet/image.hpp"

// Depth / height / grayscale encoding of a first-person RGBD frame.
namespace egonet::dhg {

struct StereoCalib {
  double focal_px = 56.0;
  double baseline_m = 0.1;
  double camera_height_m = 1.5;
  double pitch_rad = 0.0;  // downward tilt of the optical axis
  double cx = 0.0;
  double cy = 0.0;

  // Throws ShapeError unless focal_px > 0, baseline_m > 0, camera_height_m >= 0.
  void validate() const;
};

// Per-pixel real values with a validity mask. Invalid pixels hold 0.
template <class Tag>
struct PixelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  PixelMap() = default;
  PixelMap(std::size_t h, std::size_t w) : height(h), width(w), values(h * w, 0.0), valid(h * w, 0) {}

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  bool is_valid(std::size_t y, std::size_t x) const { return valid[y * width + x] != 0; }
  void set(std::size_t y, std::size_t x, double v) {
    values[y * width + x] = v;
    valid[y * width + x] = 1;
  }
  void invalidate(std::size_t y, std::size_t x) {
    values[y * width + x] = 0.0;
    valid[y * width + x] = 0;
  }
};

using DisparityMap = PixelMap<struct DisparityTag>;  // pixels
using DepthMap = PixelMap<struct DepthTag>;          // meters along the optical axis
using HeightMap = PixelMap<struct HeightTag>;        // meters above the ground plane

struct ScanlineOptions {
  int max_disparity = 16;
  double occlusion_cost = 0.04;
};

// Optimal monotone alignment of one left/right scanline pair. Left pixel x
// matches right pixel x - d with cost |left(x) - right(x - d)|, 0 <= d <= max
// disparity; every unmatched pixel on either side costs occlusion_cost.
struct ScanlineResult {
  std::vector<int> disparity;  // -1 for occluded left pixels
  double cost = 0.0;
};
ScanlineResult scanline_dp(const std::vector<double>& left, const std::vector<double>& right,
                           const ScanlineOptions& options);

// Row-by-row scanline_dp over single-channel images in [0, 1].
DisparityMap scanline_disparity(const Image& left, const Image& right,
                                const ScanlineOptions& options);

// Z = focal * baseline / d; d <= 0 or invalid gives invalid depth.
DepthMap disparity_to_depth(const DisparityMap& disparity, const StereoCalib& calib);
DisparityMap depth_to_disparity(const DepthMap& depth, const StereoCalib& calib);

// Height above the ground plane, with gravity taken from the calibrated pitch.
HeightMap depth_to_height(const DepthMap& depth, const StereoCalib& calib);

// Camera-frame depth of the ground plane along each pixel ray, invalid where
// the ray does not hit the ground in front of the camera.
DepthMap render_ground_depth(std::size_t height, std::size_t width, const StereoCalib& calib);

// luma = 0.299 R + 0.587 G + 0.114 B
Image to_grayscale(const Image& rgb);

struct DhgBounds {
  double depth_min = 0.3;
  double depth_max = 8.0;
  double height_min = -0.5;
  double height_max = 2.5;
};

struct DhgImage {
  Image channels;                    // 3 x H x W in [0, 1]: depth, height, gray
  std::vector<std::uint8_t> invalid;  // 1 where depth (and so height) is unknown
  DhgBounds bounds;
};

DhgImage assemble_dhg(const DepthMap& depth, const HeightMap& height, const Image& gray,
                      const DhgBounds& bounds);

// Inverse of the depth normalization for valid pixels.
DepthMap decode_depth(const DhgImage& dhg);

}  // namespace egonet::dhg
