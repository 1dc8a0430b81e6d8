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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "egonet/error.hpp"
#include "egonet/image.hpp"

namespace egonet::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw DataError(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

RawImage read_png(const std::filesystem::path& path) {
  File f = open(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  RawImage out;
  try {
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) depth = 8;
    png_read_update_info(png, info);
    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    out.channels = png_get_channels(png, info);
    out.bit_depth = depth;
    if (out.channels != 1 && out.channels != 3) {
      throw DataError(path.string() + ": unsupported channel count " + std::to_string(out.channels));
    }
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(rowbytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (std::size_t y = 0; y < out.height; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    const std::size_t n = out.width * out.height * out.channels;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = depth == 16 ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1])
                                   : buf[i];
    }
  } catch (const DataError& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": " + e.what());
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& path, const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) throw DataError("write_png: bad channel count");
  if (image.bit_depth != 8 && image.bit_depth != 16) throw DataError("write_png: bad bit depth");
  if (image.samples.size() != image.width * image.height * image.channels) {
    throw DataError("write_png: sample count does not match dimensions");
  }
  File f = open(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), image.bit_depth,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t bytes = image.bit_depth / 8;
    const std::size_t row_samples = image.width * image.channels;
    std::vector<unsigned char> row(row_samples * bytes);
    for (std::size_t y = 0; y < image.height; ++y) {
      const std::uint16_t* src = image.samples.data() + y * row_samples;
      for (std::size_t i = 0; i < row_samples; ++i) {
        if (bytes == 2) {
          row[2 * i] = static_cast<unsigned char>(src[i] >> 8);
          row[2 * i + 1] = static_cast<unsigned char>(src[i] & 0xff);
        } else {
          row[i] = static_cast<unsigned char>(src[i]);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (const DataError& e) {
    png_destroy_write_struct(&png, &info);
    throw DataError(path.string() + ": " + e.what());
  }
  png_destroy_write_struct(&png, &info);
}

Image to_unit(const RawImage& raw) {
  Image img(raw.channels, raw.height, raw.width);
  const double scale = raw.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (std::size_t y = 0; y < raw.height; ++y) {
    for (std::size_t x = 0; x < raw.width; ++x) {
      for (std::size_t c = 0; c < raw.channels; ++c) {
        img.at(c, y, x) = raw.samples[(y * raw.width + x) * raw.channels + c] * scale;
      }
    }
  }
  return img;
}

RawImage to_8bit(const Image& image) {
  RawImage raw{image.width, image.height, image.channels, 8, {}};
  raw.samples.resize(image.values.size());
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double v = std::round(image.at(c, y, x) * 255.0);
        raw.samples[(y * image.width + x) * image.channels + c] =
            static_cast<std::uint16_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return raw;
}

FloatMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  FloatMap map;
  double scale = 0.0;
  in >> magic >> map.width >> map.height >> scale;
  if (magic != "Pf" || !in || map.width == 0 || map.height == 0) {
    throw DataError(path.string() + ": not a single-channel PFM file");
  }
  in.get();
  if (scale > 0) throw DataError(path.string() + ": big-endian PFM is not supported");
  map.values.resize(map.width * map.height);
  for (std::size_t r = 0; r < map.height; ++r) {
    const std::size_t y = map.height - 1 - r;
    in.read(reinterpret_cast<char*>(map.values.data() + y * map.width),
            static_cast<std::streamsize>(map.width * sizeof(float)));
  }
  if (!in) throw DataError(path.string() + ": truncated PFM data");
  return map;
}

void write_pfm(const std::filesystem::path& path, const FloatMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string());
  out << "Pf\n" << map.width << ' ' << map.height << "\n-1.0\n";
  for (std::size_t r = 0; r < map.height; ++r) {
    const std::size_t y = map.height - 1 - r;
    out.write(reinterpret_cast<const char*>(map.values.data() + y * map.width),
              static_cast<std::streamsize>(map.width * sizeof(float)));
  }
}

}  // namespace egonet::io
