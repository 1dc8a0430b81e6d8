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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "egonet/data.hpp"
#include "egonet/error.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace egonet {
namespace {

using data::DatasetSpec;
using data::PlacedObject;
using data::RenderedFrame;
using data::SceneSpec;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// Index into objects of the object drawn at (x, y), or -1 for background.
int owner(const RenderedFrame& f, std::size_t x, std::size_t y) {
  for (std::size_t k = 0; k < f.objects.size(); ++k) {
    if (f.objects[k].covers(static_cast<double>(x), static_cast<double>(y))) return static_cast<int>(k);
  }
  return -1;
}

// Best pooled F-measure of any decision rule that only sees the key: rank
// keys by target fraction and sweep.
class BayesOracle {
 public:
  void add(const std::string& key, bool target) {
    auto& c = counts_[key];
    c.first += target;
    c.second += 1;
    positives_ += target;
  }

  double max_f() const {
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> groups;
    for (const auto& [k, c] : counts_) {
      groups.push_back({static_cast<double>(c.first) / static_cast<double>(c.second), c});
    }
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double best = 0.0;
    std::size_t tp = 0, predicted = 0;
    for (const auto& g : groups) {
      tp += g.second.first;
      predicted += g.second.second;
      best = std::max(best, 2.0 * static_cast<double>(tp) / static_cast<double>(predicted + positives_));
    }
    return best;
  }

 private:
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts_;
  std::size_t positives_ = 0;
};

std::string color_key(const data::Color& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f", c[0], c[1], c[2]);
  return buf;
}

std::string bin_key(double v, double width) {
  return std::to_string(static_cast<long long>(std::floor(v / width)));
}

struct OracleScores {
  double rgb = 0, depth = 0, height = 0, gray = 0, position = 0, joint = 0;
};

OracleScores oracle_scores(const DatasetSpec& spec) {
  BayesOracle rgb, depth, height, gray, position;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const SceneSpec& sc : spec.scene_specs()) {
    const auto& t = sc.target;
    const double band_lo = sc.calib.cx + t.u_offset_px.lo - t.radius_px.hi;
    const double band_hi = sc.calib.cx + t.u_offset_px.hi + t.radius_px.hi;
    for (std::size_t i = 0; i < sc.frames; ++i) {
      const RenderedFrame f = data::render_frame(sc, i);
      const dhg::HeightMap h = dhg::depth_to_height(f.depth, sc.calib);
      const Image g = dhg::to_grayscale(f.rgb);
      for (std::size_t y = 0; y < sc.height; ++y) {
        for (std::size_t x = 0; x < sc.width; ++x) {
          const bool is_target = f.mask[y * sc.width + x] > 0.5;
          const int k = owner(f, x, y);
          const data::Color c = k < 0 ? data::Color{-1, -1, -1} : f.objects[k].color;
          const double z = f.depth.at(y, x);
          rgb.add(color_key(c), is_target);
          const double clean_gray = k < 0 ? -1.0 : std::round(100.0 * (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]));
          gray.add(std::to_string(clean_gray) + "/" + bin_key(g.at(0, y, x), 0.05), is_target);
          depth.add(bin_key(z, 0.02), is_target);
          height.add(bin_key(h.at(y, x), 0.02), is_target);
          position.add(std::to_string(y) + "," + std::to_string(x), is_target);

          const bool rule = k >= 0 && c == t.color && t.depth_m.contains(z) && x >= band_lo && x <= band_hi;
          tp += rule && is_target;
          fp += rule && !is_target;
          fn += !rule && is_target;
        }
      }
    }
  }
  OracleScores s;
  s.rgb = rgb.max_f();
  s.depth = depth.max_f();
  s.height = height.max_f();
  s.gray = gray.max_f();
  s.position = position.max_f();
  s.joint = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return s;
}

DatasetSpec oracle_spec() {
  DatasetSpec spec;
  spec.seed = 3;
  spec.frames_per_scene = 40;
  spec.base.frames = 40;
  return spec;
}

TEST(Generator, SingleChannelOraclesFallShort) {
  const OracleScores s = oracle_scores(oracle_spec());
  EXPECT_LT(s.rgb, 0.7);
  EXPECT_LT(s.depth, 0.9);
  EXPECT_LT(s.height, 0.9);
  EXPECT_LT(s.gray, 0.9);
  EXPECT_LT(s.position, 0.9);
  EXPECT_DOUBLE_EQ(s.joint, 1.0);
}

TEST(Generator, BayesOracleSweepMatchesHandCount) {
  BayesOracle o;
  for (int i = 0; i < 3; ++i) o.add("a", true);
  o.add("a", false);
  o.add("b", true);
  for (int i = 0; i < 3; ++i) o.add("b", false);
  // Taking "a" only: tp 3, predicted 4, positives 4.
  EXPECT_DOUBLE_EQ(o.max_f(), 6.0 / 8.0);
}

TEST(Generator, NoDistractorsMeansMaskIsTheOnlyObject) {
  SceneSpec sc;
  sc.distractors.color_twins_min = sc.distractors.color_twins_max = 0;
  sc.distractors.geometry_twins_min = sc.distractors.geometry_twins_max = 0;
  sc.distractors.clutter_min = sc.distractors.clutter_max = 0;
  sc.distractors.lateral_decoy_prob = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const RenderedFrame f = data::render_frame(sc, i);
    ASSERT_EQ(f.objects.size(), 1u);
    for (std::size_t y = 0; y < sc.height; ++y)
      for (std::size_t x = 0; x < sc.width; ++x)
        EXPECT_EQ(f.mask[y * sc.width + x] > 0.5, owner(f, x, y) == 0);
  }
}

TEST(Generator, TargetPlacementHonoursRanges) {
  const SceneSpec sc;
  for (std::size_t i = 0; i < 50; ++i) {
    const RenderedFrame f = data::render_frame(sc, i);
    const PlacedObject& t = f.objects.at(0);
    EXPECT_EQ(t.family, "target");
    EXPECT_TRUE(sc.target.depth_m.contains(t.depth_m));
    EXPECT_TRUE(sc.target.radius_px.contains(t.extent_px));
    EXPECT_TRUE(sc.target.u_offset_px.contains(t.u - sc.calib.cx));
    EXPECT_TRUE(sc.target.v_offset_px.contains(t.v - sc.calib.cy));
    double mask_area = 0.0;
    for (double v : f.mask.data()) mask_area += v;
    EXPECT_GT(mask_area, 0.0);
  }
}

TEST(Generator, MaskPixelsBackProjectOntoTheTarget) {
  const SceneSpec sc;
  for (std::size_t i = 0; i < 20; ++i) {
    const RenderedFrame f = data::render_frame(sc, i);
    const PlacedObject& t = f.objects[0];
    const auto centre = t.centre_camera(sc.calib);
    const dhg::HeightMap h = dhg::depth_to_height(f.depth, sc.calib);
    const double cs = std::cos(sc.calib.pitch_rad), sn = std::sin(sc.calib.pitch_rad);
    const double centre_h = sc.calib.camera_height_m - (centre[1] * cs + centre[2] * sn);
    EXPECT_TRUE(sc.target.height_m.contains(centre_h));
    for (std::size_t y = 0; y < sc.height; ++y) {
      for (std::size_t x = 0; x < sc.width; ++x) {
        if (f.mask[y * sc.width + x] < 0.5) continue;
        const double z = f.depth.at(y, x);
        EXPECT_DOUBLE_EQ(z, t.depth_m);
        const double px = (static_cast<double>(x) - sc.calib.cx) * z / sc.calib.focal_px;
        const double py = (static_cast<double>(y) - sc.calib.cy) * z / sc.calib.focal_px;
        EXPECT_LE(std::hypot(px - centre[0], py - centre[1]), t.extent_m(sc.calib) + 0.01);
        // The disc is fronto-parallel, so height varies with the row offset only.
        EXPECT_NEAR(h.at(y, x), centre_h - (py - centre[1]) * cs, 0.01);
      }
    }
  }
}

TEST(Generator, BackgroundLiesOnGroundOrWall) {
  const SceneSpec sc;
  const RenderedFrame f = data::render_frame(sc, 0);
  const dhg::HeightMap h = dhg::depth_to_height(f.depth, sc.calib);
  for (std::size_t y = 0; y < sc.height; ++y) {
    for (std::size_t x = 0; x < sc.width; ++x) {
      if (owner(f, x, y) >= 0) continue;
      const double z = f.depth.at(y, x);
      EXPECT_DOUBLE_EQ(z, data::background_depth(sc, static_cast<double>(x), static_cast<double>(y)));
      const bool on_ground = std::abs(h.at(y, x)) < 1e-6;
      const double forward = z * (std::cos(sc.calib.pitch_rad) - (static_cast<double>(y) - sc.calib.cy) /
                                                                      sc.calib.focal_px * std::sin(sc.calib.pitch_rad));
      EXPECT_TRUE(on_ground || std::abs(forward - sc.wall_distance_m) < 1e-6) << x << "," << y;
    }
  }
}

TEST(Generator, ObjectsDoNotOverlap) {
  const SceneSpec sc;
  for (std::size_t i = 0; i < 30; ++i) {
    const RenderedFrame f = data::render_frame(sc, i);
    for (std::size_t y = 0; y < sc.height; ++y)
      for (std::size_t x = 0; x < sc.width; ++x) {
        int n = 0;
        for (const auto& o : f.objects) n += o.covers(static_cast<double>(x), static_cast<double>(y));
        EXPECT_LE(n, 1);
      }
  }
}

TEST(Generator, RenderIsDeterministic) {
  SceneSpec sc;
  sc.seed = 77;
  const RenderedFrame a = data::render_frame(sc, 5), b = data::render_frame(sc, 5);
  EXPECT_EQ(a.rgb.values, b.rgb.values);
  EXPECT_EQ(a.depth.values, b.depth.values);
  EXPECT_TRUE(std::ranges::equal(a.mask.data(), b.mask.data()));
  const RenderedFrame c = data::render_frame(sc, 6);
  EXPECT_NE(a.rgb.values, c.rgb.values);
}

TEST(Generator, DatasetFilesAreBitIdentical) {
  DatasetSpec spec;
  spec.scenes = 2;
  spec.frames_per_scene = 3;
  spec.seed = 9;
  const auto a = testutil::temp_dir("gen_a"), b = testutil::temp_dir("gen_b");
  data::generate_dataset(spec, a);
  data::generate_dataset(spec, b);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a);
    EXPECT_EQ(read_file(e.path()), read_file(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 1u + 2u * 3u * 3u);
}

TEST(Generator, ScenesVaryCameraButKeepTargetRanges) {
  DatasetSpec spec;
  spec.seed = 4;
  const auto scenes = spec.scene_specs();
  ASSERT_EQ(scenes.size(), spec.scenes);
  EXPECT_NE(scenes[0].calib.pitch_rad, scenes[1].calib.pitch_rad);
  for (const auto& s : scenes) {
    EXPECT_LE(std::abs(s.calib.pitch_rad - spec.base.calib.pitch_rad), spec.pitch_jitter_rad);
    EXPECT_LE(std::abs(s.calib.camera_height_m - spec.base.calib.camera_height_m), spec.camera_height_jitter_m);
    EXPECT_EQ(s.target.depth_m, spec.base.target.depth_m);
    EXPECT_EQ(s.frames, spec.frames_per_scene);
  }
}

TEST(Generator, EverySeedYieldsValidScenes) {
  DatasetSpec spec;
  spec.scenes = 8;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    spec.seed = seed;
    EXPECT_NO_THROW(spec.scene_specs()) << "seed " << seed;
  }
}

TEST(SceneSpecValidation, RejectsCollidingFamilies) {
  SceneSpec sc;
  sc.distractors.color_twin_depth_m = {0.8, 2.0};
  EXPECT_THROW(sc.validate(), DataError);
  sc = SceneSpec{};
  sc.distractors.clutter_depth_m = {0.9, 3.0};
  EXPECT_THROW(sc.validate(), DataError);
  sc = SceneSpec{};
  sc.ground_color = sc.target.color;
  EXPECT_THROW(sc.validate(), DataError);
  sc = SceneSpec{};
  sc.target.u_offset_px = {-40.0, 40.0};
  EXPECT_THROW(sc.validate(), DataError);
  sc = SceneSpec{};
  sc.target.radius_px = {3.0, 1.0};
  EXPECT_THROW(sc.validate(), ShapeError);
  sc = SceneSpec{};
  sc.distractors.lateral_decoy_prob = 1.5;
  EXPECT_THROW(sc.validate(), ShapeError);
}

TEST(SceneSpecValidation, UnplaceableTargetNamesTheScene) {
  SceneSpec sc;
  sc.scene_id = "kitchen";
  sc.target.height_m = {5.0, 6.0};
  const std::string msg = error_of([&] { data::render_frame(sc, 0); });
  EXPECT_NE(msg.find("kitchen"), std::string::npos) << msg;
}

TEST(DatasetSpecJson, RoundTrips) {
  DatasetSpec spec;
  spec.seed = 12;
  spec.scenes = 3;
  spec.base.target.depth_m = {0.6, 0.9};
  spec.base.distractors.lateral_decoy_prob = 0.25;
  const std::string text = data::format_dataset_spec(spec);
  const DatasetSpec back = data::parse_dataset_spec(text);
  EXPECT_EQ(data::format_dataset_spec(back), text);
  EXPECT_EQ(back.seed, 12u);
  EXPECT_EQ(back.base.target.depth_m, (data::Range{0.6, 0.9}));
}

TEST(DatasetSpecJson, RejectsUnknownKeysAndBadJson) {
  EXPECT_NE(error_of([] { data::parse_dataset_spec(R"({"sceens": 2})"); }).find("sceens"), std::string::npos);
  EXPECT_NE(error_of([] { data::parse_dataset_spec(R"({"target": {"colour": [1, 0, 0]}})"); }).find("spec.target"),
            std::string::npos);
  EXPECT_THROW(data::parse_dataset_spec("{"), DataError);
  EXPECT_THROW(data::parse_dataset_spec(R"({"target": {"depth_m": [2.5, 3.0]}})"), DataError);
}

TEST(DepthCodec, RoundsToMillimetres) {
  dhg::DepthMap d(1, 4);
  d.set(0, 0, 2.0005);
  d.set(0, 1, 1.23449);
  d.set(0, 2, 100.0);
  const io::RawImage raw = data::encode_depth_mm(d);
  EXPECT_EQ(raw.bit_depth, 16);
  EXPECT_TRUE(raw.samples[0] == 2000 || raw.samples[0] == 2001);
  EXPECT_EQ(raw.samples[1], 1234);
  EXPECT_EQ(raw.samples[2], 65535);
  EXPECT_EQ(raw.samples[3], 0);
  const dhg::DepthMap back = data::decode_depth_mm(raw);
  EXPECT_NEAR(back.at(0, 0), 2.0005, 0.0005 + 1e-12);
  EXPECT_FALSE(back.is_valid(0, 3));
}

class DatasetIo : public ::testing::Test {
 protected:
  void SetUp() override {
    root = testutil::temp_dir("dataset_io");
    DatasetSpec spec;
    spec.scenes = 2;
    spec.frames_per_scene = 2;
    spec.seed = 21;
    manifest = data::generate_dataset(spec, root);
  }
  std::filesystem::path root;
  data::DatasetManifest manifest;
};

TEST_F(DatasetIo, FramesRoundTripThroughDisk) {
  const auto ds = data::Dataset::open(root);
  ASSERT_EQ(ds.scene_ids(), (std::vector<std::string>{"scene0", "scene1"}));
  DatasetSpec spec;
  spec.scenes = 2;
  spec.frames_per_scene = 2;
  spec.seed = 21;
  const auto scenes = spec.scene_specs();
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& rec = ds.scene(scenes[s].scene_id);
    EXPECT_DOUBLE_EQ(rec.calib.pitch_rad, scenes[s].calib.pitch_rad);
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
      const RenderedFrame f = data::render_frame(scenes[s], i);
      const data::LoadedFrame l = ds.load_frame(rec, rec.frames[i]);
      EXPECT_TRUE(std::ranges::equal(l.mask.data(), f.mask.data()));
      for (std::size_t k = 0; k < f.rgb.values.size(); ++k) EXPECT_NEAR(l.rgb.values[k], f.rgb.values[k], 0.5 / 255 + 1e-12);
      for (std::size_t k = 0; k < f.depth.values.size(); ++k) EXPECT_NEAR(l.depth.values[k], f.depth.values[k], 5e-4 + 1e-12);
    }
  }
}

TEST_F(DatasetIo, SamplesHaveNetworkShapes) {
  const auto ds = data::Dataset::open(root);
  const auto samples = ds.samples("scene1", 32, 48);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].rgb.shape(), (Shape{3, 32, 48}));
  EXPECT_EQ(samples[0].dhg.shape(), (Shape{3, 32, 48}));
  EXPECT_EQ(samples[0].label.shape(), (Shape{32, 48}));
  EXPECT_EQ(samples[1].frame_id, "scene1/0001");
  for (const Tensor* t : {&samples[0].rgb, &samples[0].dhg}) {
    for (double v : t->data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  for (double v : samples[0].label.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST_F(DatasetIo, ManifestRoundTrips) {
  const std::string text = read_file(root / "manifest.json");
  const auto m = data::parse_manifest(text);
  EXPECT_EQ(data::format_manifest(m), text);
}

TEST_F(DatasetIo, CorruptManifestsAreRejected) {
  auto j = nlohmann::json::parse(read_file(root / "manifest.json"));
  auto bad = j;
  bad["formatVersion"] = 7;
  EXPECT_NE(error_of([&] { data::parse_manifest(bad.dump(), "m.json"); }).find("version 7"), std::string::npos);
  bad = j;
  bad["scenes"] = nlohmann::json::array();
  EXPECT_NE(error_of([&] { data::parse_manifest(bad.dump(), "m.json"); }).find("no scenes"), std::string::npos);
  bad = j;
  bad["scenes"][1]["id"] = bad["scenes"][0]["id"];
  EXPECT_THROW(data::parse_manifest(bad.dump()), DataError);
  bad = j;
  bad["scenes"][0].erase("calib");
  EXPECT_NE(error_of([&] { data::parse_manifest(bad.dump(), "m.json"); }).find("m.json"), std::string::npos);
  EXPECT_THROW(data::parse_manifest("not json"), DataError);
}

TEST_F(DatasetIo, MissingFileNamesThePath) {
  const auto ds = data::Dataset::open(root);
  const auto& rec = ds.scene("scene0");
  std::filesystem::remove(root / rec.frames[1].depth);
  const std::string msg = error_of([&] { ds.load_frame(rec, rec.frames[1]); });
  EXPECT_NE(msg.find((root / rec.frames[1].depth).string()), std::string::npos) << msg;
  EXPECT_THROW(ds.scene("scene9"), DataError);
  EXPECT_NE(error_of([] { data::Dataset::open("/nonexistent/egonet"); }).find("/nonexistent/egonet"),
            std::string::npos);
}

TEST_F(DatasetIo, DimensionMismatchIsReported) {
  const auto ds = data::Dataset::open(root);
  const auto& rec = ds.scene("scene0");
  io::RawImage small{10, 10, 1, 8, std::vector<std::uint16_t>(100, 255)};
  io::write_png(root / rec.frames[0].mask, small);
  const std::string msg = error_of([&] { ds.load_frame(rec, rec.frames[0]); });
  EXPECT_NE(msg.find("10x10"), std::string::npos) << msg;
}

TEST_F(DatasetIo, PfmDepthIsAccepted) {
  auto ds = data::Dataset::open(root);
  auto rec = ds.scene("scene0");
  io::FloatMap fm{rec.width, rec.height, std::vector<float>(rec.width * rec.height, 1.25f)};
  fm.values[0] = 0.0f;
  io::write_pfm(root / "d.pfm", fm);
  rec.frames[0].depth = "d.pfm";
  const auto l = ds.load_frame(rec, rec.frames[0]);
  EXPECT_FALSE(l.depth.is_valid(0, 0));
  EXPECT_DOUBLE_EQ(l.depth.at(1, 1), 1.25);
}

TEST(Resize, BilinearIdentityAndConstants) {
  Rng rng(8);
  Image img(2, 5, 7);
  for (double& v : img.values) v = rng.uniform();
  EXPECT_EQ(data::resize_bilinear(img, 5, 7).values, img.values);
  Image c(1, 6, 6, 0.3);
  for (double v : data::resize_bilinear(c, 11, 3).values) EXPECT_NEAR(v, 0.3, 1e-15);
  EXPECT_THROW(data::resize_bilinear(img, 0, 3), ShapeError);
}

TEST(Resize, BilinearDoublingOfARamp) {
  Image ramp(1, 1, 4);
  for (std::size_t x = 0; x < 4; ++x) ramp.at(0, 0, x) = static_cast<double>(x);
  const Image up = data::resize_bilinear(ramp, 1, 8);
  const std::vector<double> want = {0.0, 0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3.0};
  for (std::size_t x = 0; x < 8; ++x) EXPECT_NEAR(up.at(0, 0, x), want[x], 1e-15);
}

TEST(Resize, NearestKeepsMasksBinary) {
  Rng rng(2);
  Tensor m({9, 13});
  for (double& v : m.storage()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
  const Tensor r = data::resize_nearest(m, 20, 5);
  for (double v : r.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_TRUE(std::ranges::equal(data::resize_nearest(m, 9, 13).data(), m.data()));
  const Tensor up = data::resize_nearest(m, 18, 26);
  for (std::size_t y = 0; y < 18; ++y)
    for (std::size_t x = 0; x < 26; ++x) EXPECT_EQ(up[y * 26 + x], m[(y / 2) * 13 + x / 2]);
}

}  // namespace
}  // namespace egonet
