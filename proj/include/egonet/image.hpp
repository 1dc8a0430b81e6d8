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
#include <filesystem>
#include <vector>

namespace egonet {

// Planar (channel-major) image with real samples, usually in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), values(c * h * w, fill) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }
};

}  // namespace egonet

namespace egonet::io {

// Interleaved PNG samples as stored on disk (8- or 16-bit).
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (gray) or 3 (RGB)
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

RawImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

// 8-bit samples scaled by 1/255 into a planar image.
Image to_unit(const RawImage& raw);
// Planar [0, 1] image quantized to 8 bits (round to nearest, clamped).
RawImage to_8bit(const Image& image);

// Portable float map, single channel. Rows are stored bottom-to-top on disk.
struct FloatMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> values;  // top-to-bottom row-major
};
FloatMap read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const FloatMap& map);

}  // namespace egonet::io
