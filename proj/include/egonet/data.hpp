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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "egonet/dhg.hpp"
#include "egonet/image.hpp"
#include "egonet/sample.hpp"
#include "egonet/tensor.hpp"

// On-disk dataset format and the synthetic RGBD scene generator.
namespace egonet::data {

inline constexpr int kFormatVersion = 1;

using Color = std::array<double, 3>;

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool overlaps(const Range& o) const { return lo <= o.hi && o.lo <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

enum class Shape2d { kDisc, kSquare };

/// Characteristic placement of the action object. Depth is camera-frame Z;
/// the image offsets are measured from the principal point.
struct TargetSpec {
  Range depth_m{0.5, 1.0};
  Range height_m{0.7, 1.5};     // height above ground of the object centre
  Range radius_px{6.0, 8.0};
  Range u_offset_px{-5.0, 5.0};
  Range v_offset_px{0.0, 20.0};
  Color color{0.80, 0.18, 0.14};
};

/// Counts are drawn uniformly from [min, max] per frame. Families:
///   color twins: target colour, far depth, anywhere in frame
///   geometry twins: other colours, target depth range and shape
///   lateral decoys: target colour, depth and rows, pushed out of the
///     target's column band
///   clutter: squares in other colours at intermediate depths
struct DistractorSpec {
  std::size_t color_twins_min = 2, color_twins_max = 3;
  Range color_twin_depth_m{1.3, 3.5};
  Range color_twin_radius_px{6.0, 8.0};

  std::size_t geometry_twins_min = 2, geometry_twins_max = 3;
  Range geometry_twin_radius_px{6.0, 8.0};

  double lateral_decoy_prob = 1.0;

  std::size_t clutter_min = 0, clutter_max = 2;
  Range clutter_depth_m{1.2, 3.5};
  Range clutter_half_px{3.0, 6.0};
};

struct SceneSpec {
  std::string scene_id = "scene0";
  std::uint64_t seed = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t frames = 60;
  dhg::StereoCalib calib{56.0, 0.1, 1.5, 0.35, 31.5, 31.5};
  double wall_distance_m = 4.0;
  Color ground_color{0.45, 0.42, 0.38};
  Color wall_color{0.62, 0.66, 0.70};
  TargetSpec target;
  DistractorSpec distractors;
  double pixel_noise = 0.03;
  double brightness_jitter = 0.1;  // per-frame gain drawn from 1 +- this
  double min_gap_px = 2.0;

  // Throws ShapeError for out-of-range values and DataError for specs whose
  // families cannot be told apart or placed (colliding ranges, no room).
  void validate() const;
};

/// Scene-level variation used by generate_dataset.
struct DatasetSpec {
  std::uint64_t seed = 0;
  std::size_t scenes = 4;
  std::size_t frames_per_scene = 60;
  std::size_t height = 64;
  std::size_t width = 64;
  double pitch_jitter_rad = 0.04;
  double camera_height_jitter_m = 0.08;
  SceneSpec base;

  std::vector<SceneSpec> scene_specs() const;
};

DatasetSpec parse_dataset_spec(const std::string& json_text);
std::string format_dataset_spec(const DatasetSpec& spec);

struct PlacedObject {
  std::string family;  // "target", "color_twin", "geometry_twin", "decoy", "clutter"
  Shape2d shape = Shape2d::kDisc;
  double u = 0.0, v = 0.0;  // image centre, pixels
  double extent_px = 0.0;   // disc radius or square half-side
  double depth_m = 0.0;
  Color color{};

  bool covers(double x, double y) const;
  // Centre of the object in camera coordinates (x right, y down, z forward).
  std::array<double, 3> centre_camera(const dhg::StereoCalib& calib) const;
  // Physical disc radius or square half-side in meters.
  double extent_m(const dhg::StereoCalib& calib) const;
};

struct RenderedFrame {
  Image rgb;             // 3 x H x W in [0, 1]
  dhg::DepthMap depth;   // all pixels valid
  Tensor mask;           // H x W, 1 on the target
  std::vector<PlacedObject> objects;  // objects[0] is the target
};

// Deterministic in (spec, index).
RenderedFrame render_frame(const SceneSpec& spec, std::size_t index);

// Background depth (ground or wall) at pixel (x, y).
double background_depth(const SceneSpec& spec, double x, double y);

struct FrameRecord {
  std::string frame_id;
  std::string scene_id;
  std::filesystem::path rgb;    // relative to the dataset root
  std::filesystem::path depth;  // .png (16-bit mm) or .pfm (meters)
  std::filesystem::path mask;
};

struct SceneRecord {
  std::string scene_id;
  dhg::StereoCalib calib;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<FrameRecord> frames;
};

struct DatasetManifest {
  int format_version = kFormatVersion;
  dhg::DhgBounds bounds;
  std::vector<SceneRecord> scenes;

  void validate() const;
  std::vector<std::string> scene_ids() const;
};

DatasetManifest parse_manifest(const std::string& json_text, const std::string& origin = "manifest");
std::string format_manifest(const DatasetManifest& manifest);

// Depth in meters to 16-bit millimetres (rounded, clamped; invalid -> 0) and back.
io::RawImage encode_depth_mm(const dhg::DepthMap& depth);
dhg::DepthMap decode_depth_mm(const io::RawImage& raw);

// Writes rgb/depth/mask for one frame under root and returns the record.
FrameRecord save_frame(const std::filesystem::path& root, const std::string& scene_id, std::size_t index,
                       const Image& rgb, const dhg::DepthMap& depth, const Tensor& mask);

// Renders and writes every frame of the scene.
SceneRecord generate_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& root);

// Writes all scenes and manifest.json under root.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

struct LoadedFrame {
  Image rgb;  // 3 x H x W in [0, 1]
  dhg::DepthMap depth;
  Tensor mask;  // H x W binary
};

/// Read-only view of a dataset directory. Frames are read on demand and
/// checked against the manifest's dimensions.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const DatasetManifest& manifest() const { return manifest_; }
  std::vector<std::string> scene_ids() const { return manifest_.scene_ids(); }
  const SceneRecord& scene(const std::string& id) const;

  LoadedFrame load_frame(const SceneRecord& scene, const FrameRecord& frame) const;

  // Network-ready samples of one scene at the given input size.
  std::vector<Sample> samples(const std::string& scene_id, std::size_t height, std::size_t width) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
};

// Bilinear resampling with pixel-centre alignment; identity when sizes match.
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);
// Nearest-neighbour resampling of an H x W tensor.
Tensor resize_nearest(const Tensor& map, std::size_t height, std::size_t width);

// RGB as-is, DHG from depth via the scene calibration, both resized to
// height x width; mask resized by nearest neighbour.
Sample normalize_inputs(const LoadedFrame& frame, const dhg::StereoCalib& calib,
                        const dhg::DhgBounds& bounds, std::size_t height, std::size_t width);

}  // namespace egonet::data
