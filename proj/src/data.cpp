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

#include "egonet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "egonet/error.hpp"
#include "egonet/rng.hpp"

namespace egonet::data {

using json = nlohmann::json;

namespace {

constexpr std::array<Color, 6> kPalette = {{
    {0.15, 0.35, 0.80},
    {0.20, 0.65, 0.25},
    {0.85, 0.80, 0.20},
    {0.55, 0.25, 0.65},
    {0.15, 0.70, 0.75},
    {0.92, 0.92, 0.90},
}};

constexpr double kMinColorDistance = 0.4;

double color_distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

std::vector<Color> other_colors(const Color& target) {
  std::vector<Color> out;
  for (const auto& c : kPalette) {
    if (color_distance(c, target) > kMinColorDistance) out.push_back(c);
  }
  return out;
}

void check_range(const Range& r, const char* name, bool positive = false) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ShapeError(std::string(name) + " range is empty or not finite");
  }
  if (positive && !(r.lo > 0.0)) throw ShapeError(std::string(name) + " range must be positive");
}

double draw(Rng& rng, const Range& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Extent of the decoy column interval on one side of the target band.
struct Interval {
  double lo, hi;
  bool empty() const { return lo > hi; }
};

Interval left_decoy_centres(const SceneSpec& s, double r) {
  const double band = s.calib.cx + s.target.u_offset_px.lo - s.target.radius_px.hi;
  return {r, band - s.min_gap_px - r};
}

Interval right_decoy_centres(const SceneSpec& s, double r) {
  const double band = s.calib.cx + s.target.u_offset_px.hi + s.target.radius_px.hi;
  return {band + s.min_gap_px + r, static_cast<double>(s.width) - 1.0 - r};
}

}  // namespace

void SceneSpec::validate() const {
  if (height == 0 || width == 0) throw ShapeError("scene image size must be positive");
  if (frames == 0) throw ShapeError("scene needs at least one frame");
  calib.validate();
  if (calib.cx < 0.0 || calib.cx > static_cast<double>(width - 1) || calib.cy < 0.0 ||
      calib.cy > static_cast<double>(height - 1)) {
    throw ShapeError("principal point lies outside the image");
  }
  if (!(wall_distance_m > 0.0)) throw ShapeError("wall distance must be positive");
  check_range(target.depth_m, "target depth", true);
  check_range(target.height_m, "target height");
  check_range(target.radius_px, "target radius", true);
  check_range(target.u_offset_px, "target column offset");
  check_range(target.v_offset_px, "target row offset");
  check_range(distractors.color_twin_depth_m, "color twin depth", true);
  check_range(distractors.color_twin_radius_px, "color twin radius", true);
  check_range(distractors.geometry_twin_radius_px, "geometry twin radius", true);
  check_range(distractors.clutter_depth_m, "clutter depth", true);
  check_range(distractors.clutter_half_px, "clutter size", true);
  if (distractors.color_twins_min > distractors.color_twins_max ||
      distractors.geometry_twins_min > distractors.geometry_twins_max ||
      distractors.clutter_min > distractors.clutter_max) {
    throw ShapeError("distractor count minimum exceeds maximum");
  }
  if (!(distractors.lateral_decoy_prob >= 0.0 && distractors.lateral_decoy_prob <= 1.0)) {
    throw ShapeError("lateral decoy probability must lie in [0, 1]");
  }
  if (!(pixel_noise >= 0.0) || !(brightness_jitter >= 0.0 && brightness_jitter < 1.0)) {
    throw ShapeError("noise levels must be >= 0 (brightness jitter < 1)");
  }
  if (!(min_gap_px >= 0.0)) throw ShapeError("object gap must be >= 0");

  const double w1 = static_cast<double>(width - 1), h1 = static_cast<double>(height - 1);
  const double r = target.radius_px.hi;
  if (calib.cx + target.u_offset_px.lo - r < 0.0 || calib.cx + target.u_offset_px.hi + r > w1 ||
      calib.cy + target.v_offset_px.lo - r < 0.0 || calib.cy + target.v_offset_px.hi + r > h1) {
    throw DataError("target placement ranges do not keep the target inside the image");
  }
  if (distractors.color_twins_max > 0 && target.depth_m.overlaps(distractors.color_twin_depth_m)) {
    throw DataError("color twin depth range collides with the target depth range");
  }
  if (distractors.clutter_max > 0 && target.depth_m.overlaps(distractors.clutter_depth_m)) {
    throw DataError("clutter depth range collides with the target depth range");
  }
  if (distractors.lateral_decoy_prob > 0.0) {
    const double rd = target.radius_px.lo;
    if (left_decoy_centres(*this, rd).empty() && right_decoy_centres(*this, rd).empty()) {
      throw DataError("no room for lateral decoys beside the target column band");
    }
  }
  if (other_colors(target.color).empty()) throw DataError("no palette colour is distinct from the target");
  if (color_distance(target.color, ground_color) <= kMinColorDistance ||
      color_distance(target.color, wall_color) <= kMinColorDistance) {
    throw DataError("background colour too close to the target colour");
  }
}

std::vector<SceneSpec> DatasetSpec::scene_specs() const {
  if (scenes == 0) throw ShapeError("dataset needs at least one scene");
  std::vector<SceneSpec> out;
  for (std::size_t s = 0; s < scenes; ++s) {
    Rng rng(Rng::derive(seed, 1000 + s));
    SceneSpec sc = base;
    char name[32];
    std::snprintf(name, sizeof name, "scene%zu", s);
    sc.scene_id = name;
    sc.seed = Rng::derive(seed, s);
    sc.height = height;
    sc.width = width;
    sc.frames = frames_per_scene;
    sc.calib.cx = (static_cast<double>(width) - 1.0) / 2.0;
    sc.calib.cy = (static_cast<double>(height) - 1.0) / 2.0;
    sc.calib.pitch_rad = base.calib.pitch_rad + rng.uniform(-pitch_jitter_rad, pitch_jitter_rad);
    sc.calib.camera_height_m =
        base.calib.camera_height_m + rng.uniform(-camera_height_jitter_m, camera_height_jitter_m);
    // Redraw jitter that would bring a background too close to the target colour.
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (std::size_t c = 0; c < 3; ++c) {
        sc.ground_color[c] = std::clamp(base.ground_color[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
        sc.wall_color[c] = std::clamp(base.wall_color[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      }
      if (color_distance(sc.target.color, sc.ground_color) > kMinColorDistance &&
          color_distance(sc.target.color, sc.wall_color) > kMinColorDistance) {
        break;
      }
    }
    sc.validate();
    out.push_back(sc);
  }
  return out;
}

// ---- spec JSON ---------------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(where + "." + key + ": " + e.what());
  }
}

void read_range(const json& j, const char* key, Range& out, const std::string& where) {
  std::array<double, 2> v{out.lo, out.hi};
  read(j, key, v, where);
  out = {v[0], v[1]};
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

}  // namespace

DatasetSpec parse_dataset_spec(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("spec is not valid JSON: ") + e.what());
  }
  const std::string w = "spec";
  check_keys(j,
             {"seed", "scenes", "frames_per_scene", "height", "width", "pitch_jitter_rad",
              "camera_height_jitter_m", "focal_px", "baseline_m", "camera_height_m", "pitch_rad",
              "wall_distance_m", "ground_color", "wall_color", "pixel_noise", "brightness_jitter",
              "min_gap_px", "target", "distractors"},
             w);
  DatasetSpec s;
  SceneSpec& b = s.base;
  read(j, "seed", s.seed, w);
  read(j, "scenes", s.scenes, w);
  read(j, "frames_per_scene", s.frames_per_scene, w);
  read(j, "height", s.height, w);
  read(j, "width", s.width, w);
  read(j, "pitch_jitter_rad", s.pitch_jitter_rad, w);
  read(j, "camera_height_jitter_m", s.camera_height_jitter_m, w);
  read(j, "focal_px", b.calib.focal_px, w);
  read(j, "baseline_m", b.calib.baseline_m, w);
  read(j, "camera_height_m", b.calib.camera_height_m, w);
  read(j, "pitch_rad", b.calib.pitch_rad, w);
  read(j, "wall_distance_m", b.wall_distance_m, w);
  read(j, "ground_color", b.ground_color, w);
  read(j, "wall_color", b.wall_color, w);
  read(j, "pixel_noise", b.pixel_noise, w);
  read(j, "brightness_jitter", b.brightness_jitter, w);
  read(j, "min_gap_px", b.min_gap_px, w);
  if (j.contains("target")) {
    const json& t = j["target"];
    const std::string wt = w + ".target";
    check_keys(t, {"depth_m", "height_m", "radius_px", "u_offset_px", "v_offset_px", "color"}, wt);
    read_range(t, "depth_m", b.target.depth_m, wt);
    read_range(t, "height_m", b.target.height_m, wt);
    read_range(t, "radius_px", b.target.radius_px, wt);
    read_range(t, "u_offset_px", b.target.u_offset_px, wt);
    read_range(t, "v_offset_px", b.target.v_offset_px, wt);
    read(t, "color", b.target.color, wt);
  }
  if (j.contains("distractors")) {
    const json& d = j["distractors"];
    const std::string wd = w + ".distractors";
    check_keys(d,
               {"color_twins", "color_twin_depth_m", "color_twin_radius_px", "geometry_twins",
                "geometry_twin_radius_px", "lateral_decoy_prob", "clutter", "clutter_depth_m",
                "clutter_half_px"},
               wd);
    auto& ds = b.distractors;
    std::array<std::size_t, 2> n{ds.color_twins_min, ds.color_twins_max};
    read(d, "color_twins", n, wd);
    ds.color_twins_min = n[0];
    ds.color_twins_max = n[1];
    n = {ds.geometry_twins_min, ds.geometry_twins_max};
    read(d, "geometry_twins", n, wd);
    ds.geometry_twins_min = n[0];
    ds.geometry_twins_max = n[1];
    n = {ds.clutter_min, ds.clutter_max};
    read(d, "clutter", n, wd);
    ds.clutter_min = n[0];
    ds.clutter_max = n[1];
    read_range(d, "color_twin_depth_m", ds.color_twin_depth_m, wd);
    read_range(d, "color_twin_radius_px", ds.color_twin_radius_px, wd);
    read_range(d, "geometry_twin_radius_px", ds.geometry_twin_radius_px, wd);
    read(d, "lateral_decoy_prob", ds.lateral_decoy_prob, wd);
    read_range(d, "clutter_depth_m", ds.clutter_depth_m, wd);
    read_range(d, "clutter_half_px", ds.clutter_half_px, wd);
  }
  s.scene_specs();  // validates every derived scene
  return s;
}

std::string format_dataset_spec(const DatasetSpec& s) {
  const SceneSpec& b = s.base;
  const auto& d = b.distractors;
  json j = {
      {"seed", s.seed},
      {"scenes", s.scenes},
      {"frames_per_scene", s.frames_per_scene},
      {"height", s.height},
      {"width", s.width},
      {"pitch_jitter_rad", s.pitch_jitter_rad},
      {"camera_height_jitter_m", s.camera_height_jitter_m},
      {"focal_px", b.calib.focal_px},
      {"baseline_m", b.calib.baseline_m},
      {"camera_height_m", b.calib.camera_height_m},
      {"pitch_rad", b.calib.pitch_rad},
      {"wall_distance_m", b.wall_distance_m},
      {"ground_color", b.ground_color},
      {"wall_color", b.wall_color},
      {"pixel_noise", b.pixel_noise},
      {"brightness_jitter", b.brightness_jitter},
      {"min_gap_px", b.min_gap_px},
      {"target",
       {{"depth_m", range_json(b.target.depth_m)},
        {"height_m", range_json(b.target.height_m)},
        {"radius_px", range_json(b.target.radius_px)},
        {"u_offset_px", range_json(b.target.u_offset_px)},
        {"v_offset_px", range_json(b.target.v_offset_px)},
        {"color", b.target.color}}},
      {"distractors",
       {{"color_twins", {d.color_twins_min, d.color_twins_max}},
        {"color_twin_depth_m", range_json(d.color_twin_depth_m)},
        {"color_twin_radius_px", range_json(d.color_twin_radius_px)},
        {"geometry_twins", {d.geometry_twins_min, d.geometry_twins_max}},
        {"geometry_twin_radius_px", range_json(d.geometry_twin_radius_px)},
        {"lateral_decoy_prob", d.lateral_decoy_prob},
        {"clutter", {d.clutter_min, d.clutter_max}},
        {"clutter_depth_m", range_json(d.clutter_depth_m)},
        {"clutter_half_px", range_json(d.clutter_half_px)}}},
  };
  return j.dump(2) + "\n";
}

// ---- rendering -----------------------------------------------------------------

bool PlacedObject::covers(double x, double y) const {
  const double dx = x - u, dy = y - v;
  if (shape == Shape2d::kDisc) return dx * dx + dy * dy <= extent_px * extent_px;
  return std::abs(dx) <= extent_px && std::abs(dy) <= extent_px;
}

std::array<double, 3> PlacedObject::centre_camera(const dhg::StereoCalib& calib) const {
  return {(u - calib.cx) * depth_m / calib.focal_px, (v - calib.cy) * depth_m / calib.focal_px, depth_m};
}

double PlacedObject::extent_m(const dhg::StereoCalib& calib) const {
  return extent_px * depth_m / calib.focal_px;
}

double background_depth(const SceneSpec& spec, double /*x*/, double y) {
  const auto& c = spec.calib;
  const double ry = (y - c.cy) / c.focal_px;
  const double cs = std::cos(c.pitch_rad), sn = std::sin(c.pitch_rad);
  double z = std::numeric_limits<double>::infinity();
  const double down = ry * cs + sn;
  if (down > 0.0) z = std::min(z, c.camera_height_m / down);
  const double forward = cs - ry * sn;
  if (forward > 0.0) z = std::min(z, spec.wall_distance_m / forward);
  if (!std::isfinite(z)) throw DataError("pixel ray hits neither ground nor wall");
  return z;
}

namespace {

double bounding_radius(const PlacedObject& o) {
  return o.shape == Shape2d::kDisc ? o.extent_px : o.extent_px * std::sqrt(2.0);
}

// Inside the image, clear of the others by the gap, in front of the background.
bool fits(const SceneSpec& spec, const PlacedObject& o, const std::vector<PlacedObject>& placed) {
  const double e = o.extent_px;
  if (o.u - e < 0.0 || o.v - e < 0.0 || o.u + e > static_cast<double>(spec.width - 1) ||
      o.v + e > static_cast<double>(spec.height - 1)) {
    return false;
  }
  for (const auto& p : placed) {
    if (std::hypot(o.u - p.u, o.v - p.v) < bounding_radius(o) + bounding_radius(p) + spec.min_gap_px) {
      return false;
    }
  }
  const long y0 = static_cast<long>(std::ceil(o.v - e)), y1 = static_cast<long>(std::floor(o.v + e));
  for (long y = y0; y <= y1; ++y) {
    if (!(o.depth_m < background_depth(spec, o.u, static_cast<double>(y)))) return false;
  }
  return true;
}

double centre_height(const SceneSpec& spec, const PlacedObject& o) {
  const auto p = o.centre_camera(spec.calib);
  return spec.calib.camera_height_m - (p[1] * std::cos(spec.calib.pitch_rad) + p[2] * std::sin(spec.calib.pitch_rad));
}

template <class Make>
bool try_place(const SceneSpec& spec, std::vector<PlacedObject>& placed, Make make, int attempts = 200) {
  for (int a = 0; a < attempts; ++a) {
    PlacedObject o = make();
    if (fits(spec, o, placed)) {
      placed.push_back(o);
      return true;
    }
  }
  return false;
}

std::vector<PlacedObject> place_objects(const SceneSpec& spec, Rng& rng) {
  const auto& t = spec.target;
  const auto& d = spec.distractors;
  const double w1 = static_cast<double>(spec.width - 1), h1 = static_cast<double>(spec.height - 1);
  const auto others = other_colors(t.color);
  std::vector<PlacedObject> placed;

  bool ok = false;
  for (int a = 0; a < 1000 && !ok; ++a) {
    PlacedObject o{"target", Shape2d::kDisc, spec.calib.cx + draw(rng, t.u_offset_px),
                   spec.calib.cy + draw(rng, t.v_offset_px), draw(rng, t.radius_px), draw(rng, t.depth_m),
                   t.color};
    if (t.height_m.contains(centre_height(spec, o)) && fits(spec, o, placed)) {
      placed.push_back(o);
      ok = true;
    }
  }
  if (!ok) throw DataError("scene " + spec.scene_id + ": cannot place the target (spec unsatisfiable)");

  if (d.lateral_decoy_prob > 0.0 && rng.uniform() < d.lateral_decoy_prob) {
    const bool left_first = rng.uniform() < 0.5;
    try_place(spec, placed, [&] {
      PlacedObject o{"decoy", Shape2d::kDisc, 0.0, spec.calib.cy + draw(rng, t.v_offset_px),
                     draw(rng, t.radius_px), draw(rng, t.depth_m), t.color};
      Interval iv = left_first ? left_decoy_centres(spec, o.extent_px) : right_decoy_centres(spec, o.extent_px);
      if (iv.empty()) iv = left_first ? right_decoy_centres(spec, o.extent_px) : left_decoy_centres(spec, o.extent_px);
      o.u = iv.empty() ? -1e9 : rng.uniform(iv.lo, iv.hi);
      return o;
    });
  }

  const std::size_t n_geo = draw_count(rng, d.geometry_twins_min, d.geometry_twins_max);
  for (std::size_t i = 0; i < n_geo; ++i) {
    const Color c = others[rng.below(others.size())];
    try_place(spec, placed, [&] {
      const double r = draw(rng, d.geometry_twin_radius_px);
      return PlacedObject{"geometry_twin", Shape2d::kDisc, rng.uniform(r, w1 - r), rng.uniform(r, h1 - r), r,
                          draw(rng, t.depth_m), c};
    });
  }

  const std::size_t n_color = draw_count(rng, d.color_twins_min, d.color_twins_max);
  for (std::size_t i = 0; i < n_color; ++i) {
    try_place(spec, placed, [&] {
      const double r = draw(rng, d.color_twin_radius_px);
      return PlacedObject{"color_twin", Shape2d::kDisc, rng.uniform(r, w1 - r), rng.uniform(r, h1 - r), r,
                          draw(rng, d.color_twin_depth_m), t.color};
    });
  }

  const std::size_t n_clutter = draw_count(rng, d.clutter_min, d.clutter_max);
  for (std::size_t i = 0; i < n_clutter; ++i) {
    const Color c = others[rng.below(others.size())];
    try_place(spec, placed, [&] {
      const double e = draw(rng, d.clutter_half_px);
      return PlacedObject{"clutter", Shape2d::kSquare, rng.uniform(e, w1 - e), rng.uniform(e, h1 - e), e,
                          draw(rng, d.clutter_depth_m), c};
    });
  }
  return placed;
}

Color background_color(const SceneSpec& spec, double x, double y, double z) {
  const auto& c = spec.calib;
  const double ry = (y - c.cy) / c.focal_px;
  const double cs = std::cos(c.pitch_rad), sn = std::sin(c.pitch_rad);
  const double down = ry * cs + sn;
  const bool ground = down > 0.0 && std::abs(z - c.camera_height_m / down) < 1e-9;
  // 0.5 m tiles on the ground, 0.4 m panels on the wall.
  const double lateral = (x - c.cx) * z / c.focal_px;
  Color base = ground ? spec.ground_color : spec.wall_color;
  double tile = 0.0;
  if (ground) {
    const double forward = z * cs - ry * z * sn;
    tile = ((static_cast<long>(std::floor(lateral / 0.5)) + static_cast<long>(std::floor(forward / 0.5))) & 1) ? 0.04 : -0.04;
  } else {
    tile = (static_cast<long>(std::floor(lateral / 0.4)) & 1) ? 0.03 : -0.03;
  }
  for (auto& v : base) v = std::clamp(v + tile, 0.0, 1.0);
  return base;
}

}  // namespace

RenderedFrame render_frame(const SceneSpec& spec, std::size_t index) {
  spec.validate();
  Rng rng(Rng::derive(spec.seed, index));
  RenderedFrame f;
  f.objects = place_objects(spec, rng);
  const std::size_t h = spec.height, w = spec.width;
  f.rgb = Image(3, h, w);
  f.depth = dhg::DepthMap(h, w);
  f.mask = Tensor(Shape{h, w});
  const double gain = 1.0 + rng.uniform(-spec.brightness_jitter, spec.brightness_jitter);
  for (std::size_t y = 0; y < h; ++y) {
    const double yd = static_cast<double>(y);
    for (std::size_t x = 0; x < w; ++x) {
      const double xd = static_cast<double>(x);
      double z = background_depth(spec, xd, yd);
      Color color = background_color(spec, xd, yd, z);
      for (std::size_t k = 0; k < f.objects.size(); ++k) {
        const auto& o = f.objects[k];
        if (o.covers(xd, yd)) {
          z = o.depth_m;
          color = o.color;
          if (k == 0) f.mask[y * w + x] = 1.0;
          break;
        }
      }
      f.depth.set(y, x, z);
      for (std::size_t c = 0; c < 3; ++c) {
        const double noise = spec.pixel_noise > 0.0 ? spec.pixel_noise * rng.normal() : 0.0;
        f.rgb.at(c, y, x) = std::clamp(color[c] * gain + noise, 0.0, 1.0);
      }
    }
  }
  return f;
}

// ---- manifest ----------------------------------------------------------------

void DatasetManifest::validate() const {
  if (format_version != kFormatVersion) {
    throw DataError("unknown format version " + std::to_string(format_version) + " (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  if (scenes.empty()) throw DataError("no scenes");
  std::set<std::string> scene_names, frame_ids;
  for (const auto& s : scenes) {
    if (!scene_names.insert(s.scene_id).second) throw DataError("duplicate scene id " + s.scene_id);
    if (s.frames.empty()) throw DataError("scene " + s.scene_id + " has no frames");
    if (s.height == 0 || s.width == 0) throw DataError("scene " + s.scene_id + " has no image size");
    for (const auto& f : s.frames) {
      if (!frame_ids.insert(f.frame_id).second) throw DataError("duplicate frame id " + f.frame_id);
    }
  }
  if (!(bounds.depth_min < bounds.depth_max) || !(bounds.height_min < bounds.height_max)) {
    throw DataError("DHG bounds must satisfy min < max");
  }
}

std::vector<std::string> DatasetManifest::scene_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : scenes) ids.push_back(s.scene_id);
  return ids;
}

DatasetManifest parse_manifest(const std::string& text, const std::string& origin) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("formatVersion").get<int>();
    if (m.format_version != kFormatVersion) m.validate();
    if (j.contains("bounds")) {
      const json& b = j["bounds"];
      m.bounds.depth_min = b.at("depth_min").get<double>();
      m.bounds.depth_max = b.at("depth_max").get<double>();
      m.bounds.height_min = b.at("height_min").get<double>();
      m.bounds.height_max = b.at("height_max").get<double>();
    }
    for (const json& s : j.value("scenes", json::array())) {
      SceneRecord r;
      r.scene_id = s.at("id").get<std::string>();
      r.height = s.at("height").get<std::size_t>();
      r.width = s.at("width").get<std::size_t>();
      const json& c = s.at("calib");
      r.calib.focal_px = c.at("focal_px").get<double>();
      r.calib.baseline_m = c.at("baseline_m").get<double>();
      r.calib.camera_height_m = c.at("camera_height_m").get<double>();
      r.calib.pitch_rad = c.at("pitch_rad").get<double>();
      r.calib.cx = c.at("cx").get<double>();
      r.calib.cy = c.at("cy").get<double>();
      for (const json& f : s.at("frames")) {
        r.frames.push_back(FrameRecord{f.at("id").get<std::string>(), r.scene_id,
                                       f.at("rgb").get<std::string>(), f.at("depth").get<std::string>(),
                                       f.at("mask").get<std::string>()});
      }
      m.scenes.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(origin + ": " + e.what());
  }
  try {
    m.validate();
  } catch (const DataError& e) {
    throw DataError(origin + ": " + e.what());
  }
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  json scenes = json::array();
  for (const auto& s : m.scenes) {
    json frames = json::array();
    for (const auto& f : s.frames) {
      frames.push_back({{"id", f.frame_id},
                        {"rgb", f.rgb.generic_string()},
                        {"depth", f.depth.generic_string()},
                        {"mask", f.mask.generic_string()}});
    }
    scenes.push_back({{"id", s.scene_id},
                      {"height", s.height},
                      {"width", s.width},
                      {"calib",
                       {{"focal_px", s.calib.focal_px},
                        {"baseline_m", s.calib.baseline_m},
                        {"camera_height_m", s.calib.camera_height_m},
                        {"pitch_rad", s.calib.pitch_rad},
                        {"cx", s.calib.cx},
                        {"cy", s.calib.cy}}},
                      {"frames", frames}});
  }
  const json j = {{"formatVersion", m.format_version},
                  {"bounds",
                   {{"depth_min", m.bounds.depth_min},
                    {"depth_max", m.bounds.depth_max},
                    {"height_min", m.bounds.height_min},
                    {"height_max", m.bounds.height_max}}},
                  {"scenes", scenes}};
  return j.dump(2) + "\n";
}

// ---- frame files ---------------------------------------------------------------

io::RawImage encode_depth_mm(const dhg::DepthMap& depth) {
  io::RawImage raw{depth.width, depth.height, 1, 16, std::vector<std::uint16_t>(depth.values.size(), 0)};
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    if (!depth.valid[i]) continue;
    const double mm = std::round(depth.values[i] * 1000.0);
    raw.samples[i] = static_cast<std::uint16_t>(std::clamp(mm, 1.0, 65535.0));
  }
  return raw;
}

dhg::DepthMap decode_depth_mm(const io::RawImage& raw) {
  if (raw.channels != 1 || raw.bit_depth != 16) throw DataError("depth PNG must be 16-bit single channel");
  dhg::DepthMap d(raw.height, raw.width);
  for (std::size_t y = 0; y < raw.height; ++y) {
    for (std::size_t x = 0; x < raw.width; ++x) {
      const std::uint16_t mm = raw.samples[y * raw.width + x];
      if (mm != 0) d.set(y, x, static_cast<double>(mm) / 1000.0);
    }
  }
  return d;
}

namespace {

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

FrameRecord save_frame(const std::filesystem::path& root, const std::string& scene_id, std::size_t index,
                       const Image& rgb, const dhg::DepthMap& depth, const Tensor& mask) {
  if (rgb.channels != 3) throw ShapeError("RGB frame must have 3 channels");
  if (depth.height != rgb.height || depth.width != rgb.width || mask.shape() != Shape{rgb.height, rgb.width}) {
    throw ShapeError("frame images differ in size");
  }
  const std::string name = frame_name(index);
  FrameRecord rec{scene_id + "/" + name, scene_id, std::filesystem::path(scene_id) / "rgb" / (name + ".png"),
                  std::filesystem::path(scene_id) / "depth" / (name + ".png"),
                  std::filesystem::path(scene_id) / "mask" / (name + ".png")};
  for (const char* sub : {"rgb", "depth", "mask"}) std::filesystem::create_directories(root / scene_id / sub);
  io::write_png(root / rec.rgb, io::to_8bit(rgb));
  io::write_png(root / rec.depth, encode_depth_mm(depth));
  io::RawImage m{rgb.width, rgb.height, 1, 8, std::vector<std::uint16_t>(mask.size(), 0)};
  for (std::size_t i = 0; i < mask.size(); ++i) m.samples[i] = mask[i] != 0.0 ? 255 : 0;
  io::write_png(root / rec.mask, m);
  return rec;
}

SceneRecord generate_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& root) {
  spec.validate();
  SceneRecord rec{spec.scene_id, spec.calib, spec.height, spec.width, {}};
  for (std::size_t i = 0; i < spec.frames; ++i) {
    const RenderedFrame f = render_frame(spec, i);
    rec.frames.push_back(save_frame(root, spec.scene_id, i, f.rgb, f.depth, f.mask));
  }
  return rec;
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root) {
  DatasetManifest m;
  for (const auto& sc : spec.scene_specs()) m.scenes.push_back(generate_synthetic_scene(sc, root));
  m.validate();
  write_text(root / "manifest.json", format_manifest(m));
  return m;
}

// ---- loading -----------------------------------------------------------------

Dataset Dataset::open(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  std::ostringstream ss;
  ss << in.rdbuf();
  Dataset d;
  d.root_ = root;
  d.manifest_ = parse_manifest(ss.str(), path.string());
  return d;
}

const SceneRecord& Dataset::scene(const std::string& id) const {
  for (const auto& s : manifest_.scenes) {
    if (s.scene_id == id) return s;
  }
  throw DataError("dataset " + root_.string() + " has no scene '" + id + "'");
}

LoadedFrame Dataset::load_frame(const SceneRecord& scene, const FrameRecord& frame) const {
  const auto need = [&](const std::filesystem::path& rel) {
    const auto p = root_ / rel;
    if (!std::filesystem::exists(p)) throw DataError(p.string() + ": missing file for frame " + frame.frame_id);
    return p;
  };
  const auto check_size = [&](std::size_t w, std::size_t h, const std::filesystem::path& p) {
    if (w != scene.width || h != scene.height) {
      throw DataError(p.string() + ": size " + std::to_string(w) + "x" + std::to_string(h) +
                      " does not match the scene size " + std::to_string(scene.width) + "x" +
                      std::to_string(scene.height));
    }
  };

  LoadedFrame out;
  const auto rgb_path = need(frame.rgb);
  const io::RawImage rgb = io::read_png(rgb_path);
  check_size(rgb.width, rgb.height, rgb_path);
  if (rgb.bit_depth != 8) throw DataError(rgb_path.string() + ": expected an 8-bit image");
  out.rgb = io::to_unit(rgb);
  if (out.rgb.channels == 1) {
    Image rgb3(3, out.rgb.height, out.rgb.width);
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(out.rgb.values.begin(), out.rgb.values.end(),
                rgb3.values.begin() + static_cast<std::ptrdiff_t>(c * out.rgb.values.size()));
    }
    out.rgb = std::move(rgb3);
  }

  const auto depth_path = need(frame.depth);
  if (depth_path.extension() == ".pfm") {
    const io::FloatMap fm = io::read_pfm(depth_path);
    check_size(fm.width, fm.height, depth_path);
    out.depth = dhg::DepthMap(fm.height, fm.width);
    for (std::size_t i = 0; i < fm.values.size(); ++i) {
      const double z = fm.values[i];
      if (std::isfinite(z) && z > 0.0) {
        out.depth.values[i] = z;
        out.depth.valid[i] = 1;
      }
    }
  } else {
    const io::RawImage raw = io::read_png(depth_path);
    check_size(raw.width, raw.height, depth_path);
    try {
      out.depth = decode_depth_mm(raw);
    } catch (const DataError& e) {
      throw DataError(depth_path.string() + ": " + e.what());
    }
  }

  const auto mask_path = need(frame.mask);
  const io::RawImage mask = io::read_png(mask_path);
  check_size(mask.width, mask.height, mask_path);
  if (mask.channels != 1 || mask.bit_depth != 8) {
    throw DataError(mask_path.string() + ": mask must be an 8-bit grayscale PNG");
  }
  out.mask = Tensor(Shape{mask.height, mask.width});
  for (std::size_t i = 0; i < mask.samples.size(); ++i) out.mask[i] = mask.samples[i] >= 128 ? 1.0 : 0.0;
  return out;
}

std::vector<Sample> Dataset::samples(const std::string& scene_id, std::size_t height, std::size_t width) const {
  const SceneRecord& s = scene(scene_id);
  std::vector<Sample> out;
  out.reserve(s.frames.size());
  for (const auto& f : s.frames) {
    Sample smp = normalize_inputs(load_frame(s, f), s.calib, manifest_.bounds, height, width);
    smp.frame_id = f.frame_id;
    smp.scene_id = s.scene_id;
    out.push_back(std::move(smp));
  }
  return out;
}

// ---- normalization -------------------------------------------------------------

Image resize_bilinear(const Image& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ShapeError("resize target must be non-empty");
  if (image.height == height && image.width == width) return image;
  Image out(image.channels, height, width);
  const auto source = [](std::size_t i, std::size_t out_n, std::size_t in_n) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in_n) / static_cast<double>(out_n) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, in_n - 1);
    return std::tuple{i0, i1, s - static_cast<double>(i0)};
  };
  for (std::size_t y = 0; y < height; ++y) {
    const auto [y0, y1, ty] = source(y, height, image.height);
    for (std::size_t x = 0; x < width; ++x) {
      const auto [x0, x1, tx] = source(x, width, image.width);
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(c, y0, x0) + tx * (image.at(c, y0, x1) - image.at(c, y0, x0));
        const double bot = image.at(c, y1, x0) + tx * (image.at(c, y1, x1) - image.at(c, y1, x0));
        out.at(c, y, x) = top + ty * (bot - top);
      }
    }
  }
  return out;
}

Tensor resize_nearest(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("nearest resize expects H x W, got " + shape_string(map.shape()));
  if (height == 0 || width == 0) throw ShapeError("resize target must be non-empty");
  const std::size_t ih = map.dim(0), iw = map.dim(1);
  Tensor out(Shape{height, width});
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(ih - 1, (2 * y + 1) * ih / (2 * height));
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(iw - 1, (2 * x + 1) * iw / (2 * width));
      out[y * width + x] = map[sy * iw + sx];
    }
  }
  return out;
}

Sample normalize_inputs(const LoadedFrame& frame, const dhg::StereoCalib& calib, const dhg::DhgBounds& bounds,
                        std::size_t height, std::size_t width) {
  const Image gray = dhg::to_grayscale(frame.rgb);
  const dhg::HeightMap h = dhg::depth_to_height(frame.depth, calib);
  const dhg::DhgImage d = dhg::assemble_dhg(frame.depth, h, gray, bounds);
  const Image rgb = resize_bilinear(frame.rgb, height, width);
  const Image dhg_img = resize_bilinear(d.channels, height, width);
  Sample s;
  s.rgb = Tensor(Shape{3, height, width}, rgb.values);
  s.dhg = Tensor(Shape{3, height, width}, dhg_img.values);
  s.label = resize_nearest(frame.mask, height, width);
  return s;
}

}  // namespace egonet::data
