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

#include "egonet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "egonet/data.hpp"
#include "egonet/dhg.hpp"
#include "egonet/error.hpp"
#include "egonet/eval.hpp"
#include "egonet/image.hpp"
#include "egonet/model.hpp"
#include "egonet/pipeline.hpp"
#include "egonet/trainer.hpp"

namespace egonet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// State shared by all subcommands of one invocation.
struct Context {
  std::vector<std::string> argv;
  // Config file contents recorded by a previous run, keyed by option name.
  std::map<std::string, std::string> embedded;
  std::map<std::string, std::string> used;  // contents read during this run

  std::optional<std::string> config_text(const std::string& option, const std::string& path) {
    std::string text;
    if (auto it = embedded.find(option); it != embedded.end()) {
      text = it->second;
    } else if (!path.empty()) {
      text = read_text(path);
    } else {
      return std::nullopt;
    }
    used[option] = text;
    return text;
  }
};

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory " + out.string());
}

void write_run_json(const fs::path& out, const Context& ctx, const std::string& subcommand,
                    std::uint64_t seed, const json& resolved) {
  json j = {{"tool", "egonet"},
            {"version", kVersion},
            {"subcommand", subcommand},
            {"argv", ctx.argv},
            {"seed", seed},
            {"resolved", resolved},
            {"embedded", ctx.used}};
  write_text(out / "run.json", j.dump(2) + "\n");
}

std::vector<double> thresholds_for(std::size_t n) { return eval::uniform_thresholds(n); }

void write_prob_png(const fs::path& path, const Tensor& map) {
  Image img(1, map.dim(0), map.dim(1));
  std::copy(map.data().begin(), map.data().end(), img.values.begin());
  io::write_png(path, io::to_8bit(img));
}

void write_eval_outputs(const fs::path& out, const eval::EvalReport& report, const std::string& label) {
  eval::write_report_csv(out / "report.csv", report);
  eval::write_curves_csv(out / "curves.csv", report);
  std::vector<eval::NamedCurve> curves;
  for (const auto& s : report.scenes) curves.push_back({label + " " + s.scene, s.curve});
  eval::write_pr_svg(out / "pr.svg", curves);
}

dhg::StereoCalib calib_from_json(const json& c, std::size_t height, std::size_t width) {
  dhg::StereoCalib k;
  k.cx = (static_cast<double>(width) - 1.0) / 2.0;
  k.cy = (static_cast<double>(height) - 1.0) / 2.0;
  try {
    k.focal_px = c.value("focal_px", k.focal_px);
    k.baseline_m = c.value("baseline_m", k.baseline_m);
    k.camera_height_m = c.value("camera_height_m", k.camera_height_m);
    k.pitch_rad = c.value("pitch_rad", k.pitch_rad);
    k.cx = c.value("cx", k.cx);
    k.cy = c.value("cy", k.cy);
  } catch (const json::exception& e) {
    throw DataError(std::string("calibration: ") + e.what());
  }
  k.validate();
  return k;
}

json calib_json(const dhg::StereoCalib& k) {
  return {{"focal_px", k.focal_px}, {"baseline_m", k.baseline_m}, {"camera_height_m", k.camera_height_m},
          {"pitch_rad", k.pitch_rad}, {"cx", k.cx}, {"cy", k.cy}};
}

io::FloatMap to_float_map(const std::vector<double>& values, const std::vector<std::uint8_t>& valid,
                          std::size_t height, std::size_t width) {
  io::FloatMap m{width, height, std::vector<float>(values.size(), 0.0f)};
  for (std::size_t i = 0; i < values.size(); ++i) m.values[i] = valid[i] ? static_cast<float>(values[i]) : 0.0f;
  return m;
}

Image load_gray(const fs::path& path) {
  const io::RawImage raw = io::read_png(path);
  if (raw.bit_depth != 8) throw DataError(path.string() + ": expected an 8-bit image");
  Image img = io::to_unit(raw);
  return img.channels == 1 ? img : dhg::to_grayscale(img);
}

// ---- subcommand options ---------------------------------------------------------

struct DepthOpts {
  std::string left, right, calib, out;
  int max_disparity = 16;
  double occlusion_cost = 0.04;
};

struct EncodeOpts {
  std::string dataset, out;
  std::optional<double> depth_min, depth_max, height_min, height_max;
};

struct SynthOpts {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> scenes, frames;
};

struct TrainOpts {
  std::string dataset, config, out, preset = "toy", variant, holdout;
  std::optional<std::uint64_t> seed;
};

struct EvalOpts {
  std::string dataset, checkpoint, baseline, config, out, scenes;
  std::size_t thresholds = 101;
  bool per_image = false;
  bool no_maps = false;
};

struct AblateOpts {
  std::string dataset, config, out, preset = "toy";
  std::optional<std::uint64_t> seed;
  std::size_t thresholds = 101;
};

struct ReportOpts {
  std::vector<std::string> inputs;
  std::string out;
};

struct ReplayOpts {
  std::string run, out;
};

pipeline::Experiment resolve_experiment(Context& ctx, const std::string& config, const std::string& preset,
                                        const std::optional<std::uint64_t>& seed, const std::string& variant) {
  pipeline::Experiment base;
  base.train = train::TrainConfig::preset(preset);
  pipeline::Experiment e = base;
  if (auto text = ctx.config_text("config", config)) e = pipeline::parse_experiment(*text, base);
  if (seed) e.train.seed = *seed;
  if (!variant.empty()) e.model.variant = model::parse_variant(variant);
  e.model.dropout_rate = e.train.dropout_rate;
  e.model.validate();
  e.train.validate();
  return e;
}

// ---- subcommands ----------------------------------------------------------------

void cmd_depth(Context& ctx, const DepthOpts& o) {
  const Image left = load_gray(o.left), right = load_gray(o.right);
  if (left.height != right.height || left.width != right.width) {
    throw DataError("stereo pair sizes differ: " + o.left + " vs " + o.right);
  }
  json cj = json::object();
  if (auto text = ctx.config_text("calib", o.calib)) {
    try {
      cj = json::parse(*text);
    } catch (const json::parse_error& e) {
      throw DataError(o.calib + ": " + e.what());
    }
  }
  const dhg::StereoCalib calib = calib_from_json(cj, left.height, left.width);
  const fs::path out = o.out;
  prepare_out(out);
  const dhg::ScanlineOptions sopt{o.max_disparity, o.occlusion_cost};
  const dhg::DisparityMap disp = dhg::scanline_disparity(left, right, sopt);
  const dhg::DepthMap depth = dhg::disparity_to_depth(disp, calib);
  io::write_pfm(out / "disparity.pfm", to_float_map(disp.values, disp.valid, disp.height, disp.width));
  io::write_pfm(out / "depth.pfm", to_float_map(depth.values, depth.valid, depth.height, depth.width));
  io::write_png(out / "depth.png", data::encode_depth_mm(depth));
  write_run_json(out, ctx, "depth", 0,
                 {{"left", o.left}, {"right", o.right}, {"calib", calib_json(calib)},
                  {"max_disparity", o.max_disparity}, {"occlusion_cost", o.occlusion_cost}});
}

void cmd_encode(Context& ctx, const EncodeOpts& o) {
  const data::Dataset ds = data::Dataset::open(o.dataset);
  dhg::DhgBounds b = ds.manifest().bounds;
  if (o.depth_min) b.depth_min = *o.depth_min;
  if (o.depth_max) b.depth_max = *o.depth_max;
  if (o.height_min) b.height_min = *o.height_min;
  if (o.height_max) b.height_max = *o.height_max;
  if (!(b.depth_min < b.depth_max) || !(b.height_min < b.height_max)) {
    throw ShapeError("DHG bounds must satisfy min < max");
  }
  const fs::path out = o.out;
  prepare_out(out);
  json frames = json::array();
  for (const auto& scene : ds.manifest().scenes) {
    fs::create_directories(out / scene.scene_id / "dhg");
    for (const auto& f : scene.frames) {
      const data::LoadedFrame lf = ds.load_frame(scene, f);
      const Image gray = dhg::to_grayscale(lf.rgb);
      const dhg::DhgImage d = dhg::assemble_dhg(lf.depth, dhg::depth_to_height(lf.depth, scene.calib), gray, b);
      const fs::path rel = fs::path(scene.scene_id) / "dhg" / f.rgb.filename();
      io::write_png(out / rel, io::to_8bit(d.channels));
      frames.push_back({{"id", f.frame_id}, {"dhg", rel.generic_string()}});
    }
  }
  const json bounds = {{"depth_min", b.depth_min}, {"depth_max", b.depth_max},
                       {"height_min", b.height_min}, {"height_max", b.height_max}};
  write_text(out / "dhg.json", json{{"formatVersion", data::kFormatVersion}, {"bounds", bounds},
                                    {"channels", {"depth", "height", "gray"}}, {"frames", frames}}
                                       .dump(2) + "\n");
  write_run_json(out, ctx, "encode", 0, {{"dataset", o.dataset}, {"bounds", bounds}});
}

void cmd_synth(Context& ctx, const SynthOpts& o) {
  data::DatasetSpec spec;
  if (auto text = ctx.config_text("config", o.config)) spec = data::parse_dataset_spec(*text);
  if (o.seed) spec.seed = *o.seed;
  if (o.scenes) spec.scenes = *o.scenes;
  if (o.frames) spec.frames_per_scene = *o.frames;
  spec.scene_specs();
  const fs::path out = o.out;
  prepare_out(out);
  data::generate_dataset(spec, out);
  const std::string spec_text = data::format_dataset_spec(spec);
  write_text(out / "spec.json", spec_text);
  write_run_json(out, ctx, "synth", spec.seed, json::parse(spec_text));
}

void cmd_train(Context& ctx, const TrainOpts& o) {
  const pipeline::Experiment e = resolve_experiment(ctx, o.config, o.preset, o.seed, o.variant);
  const data::Dataset ds = data::Dataset::open(o.dataset);
  std::vector<Sample> train_set;
  bool held = o.holdout.empty();
  for (const auto& id : ds.scene_ids()) {
    if (id == o.holdout) {
      held = true;
      continue;
    }
    auto s = ds.samples(id, e.model.input_height, e.model.input_width);
    std::move(s.begin(), s.end(), std::back_inserter(train_set));
  }
  if (!held) throw DataError("holdout scene '" + o.holdout + "' is not in the dataset");
  if (train_set.empty()) throw DataError("no training frames left after the holdout");

  const fs::path out = o.out;
  prepare_out(out);
  train::TrainCallbacks cb;
  cb.on_checkpoint = [&](std::size_t it, const model::EgoNetParams& p) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%06zu.bin", it);
    model::save_checkpoint(out / name, e.model, p);
  };
  const train::TrainResult r = pipeline::train_model(e, train_set, cb);
  model::save_checkpoint(out / "checkpoint.bin", e.model, r.params);
  model::save_config(out / "model.cfg", e.model);
  write_text(out / "experiment.cfg", pipeline::format_experiment(e));
  train::write_loss_trace_csv(out / "loss.csv", r.trace);
  write_run_json(out, ctx, "train", e.train.seed,
                 {{"dataset", o.dataset}, {"holdout", o.holdout}, {"experiment", pipeline::format_experiment(e)}});
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void cmd_eval(Context& ctx, const EvalOpts& o) {
  if (o.checkpoint.empty() == o.baseline.empty()) {
    throw ShapeError("eval needs exactly one of --checkpoint or --baseline");
  }
  const data::Dataset ds = data::Dataset::open(o.dataset);
  const auto thresholds = thresholds_for(o.thresholds);
  const eval::Pooling pooling = o.per_image ? eval::Pooling::kPerImage : eval::Pooling::kDataset;
  std::vector<std::string> scenes = o.scenes.empty() ? ds.scene_ids() : split_list(o.scenes);
  for (const auto& s : scenes) ds.scene(s);

  const fs::path out = o.out;
  json resolved = {{"dataset", o.dataset}, {"thresholds", o.thresholds}, {"per_image", o.per_image},
                   {"scenes", scenes}};
  std::vector<eval::SceneScore> scores;
  std::map<std::string, std::vector<Tensor>> maps;
  std::map<std::string, std::vector<Sample>> samples;
  std::string label;
  if (!o.checkpoint.empty()) {
    std::string cfg_path = o.config;
    if (cfg_path.empty()) cfg_path = (fs::path(o.checkpoint).parent_path() / "model.cfg").string();
    const auto text = ctx.config_text("config", cfg_path);
    model::EgoNetConfig mc = pipeline::parse_experiment(*text).model;
    const model::Checkpoint ck = model::load_checkpoint(o.checkpoint);
    if (ck.config_digest != model::config_digest(mc)) {
      throw DataError(o.checkpoint + ": checkpoint does not match the model config " + cfg_path);
    }
    const model::EgoNet net(mc);
    net.check_params(ck.params);
    prepare_out(out);
    for (const auto& id : scenes) {
      samples[id] = ds.samples(id, mc.input_height, mc.input_width);
      maps[id] = pipeline::predict_samples(net, ck.params, samples[id]);
    }
    resolved["checkpoint"] = o.checkpoint;
    resolved["model"] = model::format_config(mc);
    label = model::variant_name(mc.variant);
  } else {
    const eval::Method method = pipeline::baseline_method(o.baseline);
    pipeline::SceneSamples all;
    for (const auto& id : ds.scene_ids()) {
      const auto& sc = ds.scene(id);
      all[id] = ds.samples(id, sc.height, sc.width);
    }
    prepare_out(out);
    for (const auto& id : scenes) {
      std::vector<Sample> train_set;
      for (const auto& [other, s] : all) {
        if (other != id) train_set.insert(train_set.end(), s.begin(), s.end());
      }
      if (train_set.empty()) train_set = all.at(id);
      samples[id] = all.at(id);
      maps[id] = method(train_set, samples[id]);
    }
    resolved["baseline"] = o.baseline;
    label = o.baseline;
  }
  for (const auto& id : scenes) {
    std::vector<Tensor> masks;
    for (const auto& s : samples[id]) masks.push_back(s.label);
    scores.push_back(eval::score_scene(id, maps[id], masks, thresholds, pooling));
    if (!o.no_maps) {
      fs::create_directories(out / "maps" / id);
      for (std::size_t k = 0; k < maps[id].size(); ++k) {
        const std::string& fid = samples[id][k].frame_id;
        write_prob_png(out / "maps" / id / (fs::path(fid).filename().string() + ".png"), maps[id][k]);
      }
    }
  }
  const eval::EvalReport report = eval::make_report(std::move(scores));
  write_eval_outputs(out, report, label);
  resolved["method"] = label;
  write_run_json(out, ctx, "eval", 0, resolved);
  std::printf("%s: mean MF %.4f, mean AP %.4f over %zu scenes\n", label.c_str(), report.mean_mf, report.mean_ap,
              report.scenes.size());
}

void cmd_ablate(Context& ctx, const AblateOpts& o) {
  const pipeline::Experiment e = resolve_experiment(ctx, o.config, o.preset, o.seed, "");
  const data::Dataset ds = data::Dataset::open(o.dataset);
  const auto samples = pipeline::load_samples(ds, e.model.input_height, e.model.input_width);
  const auto thresholds = thresholds_for(o.thresholds);
  const fs::path out = o.out;
  prepare_out(out);
  const auto rows = pipeline::run_ablation(samples, e, thresholds, pipeline::thread_count_from_env());
  pipeline::write_ablation_csv(out / "ablation.csv", rows);
  std::vector<eval::NamedCurve> curves;
  for (const auto& r : rows) {
    const std::string name(model::variant_name(r.variant));
    eval::write_report_csv(out / ("report_" + name + ".csv"), r.report);
    eval::write_curves_csv(out / ("curves_" + name + ".csv"), r.report);
    for (const auto& s : r.report.scenes) curves.push_back({name + " " + s.scene, s.curve});
    std::printf("%-9s mean MF %.4f, mean AP %.4f\n", name.c_str(), r.report.mean_mf, r.report.mean_ap);
  }
  eval::write_pr_svg(out / "pr.svg", curves);
  write_run_json(out, ctx, "ablate", e.train.seed,
                 {{"dataset", o.dataset}, {"thresholds", o.thresholds}, {"experiment", pipeline::format_experiment(e)}});
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_number(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(where.string() + ": bad number '" + s + "'");
}

// Dataset-pooled curve from per-scene count columns.
eval::PRCurve pooled_curve(const fs::path& curves_csv) {
  const auto rows = read_csv(curves_csv);
  std::map<double, std::array<double, 3>> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 7) throw DataError(curves_csv.string() + ": expected 7 columns");
    auto& c = counts[to_number(rows[i][1], curves_csv)];
    for (int k = 0; k < 3; ++k) c[k] += to_number(rows[i][4 + k], curves_csv);
  }
  eval::PRCurve curve;
  for (const auto& [t, c] : counts) {
    curve.thresholds.push_back(t);
    curve.tp.push_back(static_cast<std::uint64_t>(c[0]));
    curve.fp.push_back(static_cast<std::uint64_t>(c[1]));
    curve.fn.push_back(static_cast<std::uint64_t>(c[2]));
    curve.precision.push_back(c[0] + c[1] > 0 ? c[0] / (c[0] + c[1]) : 1.0);
    curve.recall.push_back(c[0] + c[2] > 0 ? c[0] / (c[0] + c[2]) : 0.0);
  }
  return curve;
}

void cmd_report(Context& ctx, const ReportOpts& o) {
  std::ostringstream merged;
  merged.precision(17);
  merged << "method,scene,MF,AP\n";
  std::vector<eval::NamedCurve> curves;
  for (const auto& dir_str : o.inputs) {
    const fs::path dir = dir_str;
    std::string method = dir.filename().string();
    if (method.empty()) method = dir.parent_path().filename().string();
    if (fs::exists(dir / "run.json")) {
      const json run = json::parse(read_text(dir / "run.json"), nullptr, false);
      if (run.is_object() && run.contains("resolved") && run["resolved"].contains("method")) {
        method = run["resolved"]["method"].get<std::string>();
      }
    }
    if (fs::exists(dir / "report.csv")) {
      const auto rows = read_csv(dir / "report.csv");
      if (rows.empty() || rows[0] != std::vector<std::string>{"scene", "MF", "AP"}) {
        throw DataError((dir / "report.csv").string() + ": unexpected header");
      }
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) throw DataError((dir / "report.csv").string() + ": expected 3 columns");
        merged << method << ',' << rows[i][0] << ',' << rows[i][1] << ',' << rows[i][2] << '\n';
      }
      if (fs::exists(dir / "curves.csv")) curves.push_back({method, pooled_curve(dir / "curves.csv")});
    } else if (fs::exists(dir / "ablation.csv")) {
      const auto rows = read_csv(dir / "ablation.csv");
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 3) throw DataError((dir / "ablation.csv").string() + ": expected 3 columns");
        merged << rows[i][0] << ",mean," << rows[i][1] << ',' << rows[i][2] << '\n';
        const fs::path c = dir / ("curves_" + rows[i][0] + ".csv");
        if (fs::exists(c)) curves.push_back({rows[i][0], pooled_curve(c)});
      }
    } else {
      throw DataError(dir.string() + ": no report.csv or ablation.csv");
    }
  }
  const fs::path out = o.out;
  prepare_out(out);
  write_text(out / "merged.csv", merged.str());
  eval::write_pr_svg(out / "pr.svg", curves);
  write_run_json(out, ctx, "report", 0, {{"inputs", o.inputs}});
}

int dispatch(Context& ctx, int argc, const char* const* argv);

void cmd_replay(const ReplayOpts& o) {
  const json run = json::parse(read_text(o.run), nullptr, false);
  if (!run.is_object() || !run.contains("argv")) throw DataError(o.run + ": not a run.json file");
  std::vector<std::string> args = run["argv"].get<std::vector<std::string>>();
  bool replaced = false;
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--out") {
      args[i + 1] = o.out;
      replaced = true;
    }
  }
  if (!replaced) throw DataError(o.run + ": recorded command has no --out");
  Context inner;
  inner.argv = args;
  inner.embedded = run.value("embedded", std::map<std::string, std::string>{});
  std::vector<const char*> ptrs{"egonet"};
  for (const auto& a : args) ptrs.push_back(a.c_str());
  const int code = dispatch(inner, static_cast<int>(ptrs.size()), ptrs.data());
  if (code != kOk) throw DataError("replayed command failed with exit code " + std::to_string(code));
}

int dispatch(Context& ctx, int argc, const char* const* argv) {
  CLI::App app{"EgoNet action-object detection from first-person RGBD"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // Files whose contents a replay carries in run.json need not exist on disk.
  const auto input_file = [&ctx](const char* option) {
    return CLI::Validator(
        [&ctx, option](std::string& path) {
          return ctx.embedded.contains(option) ? std::string() : CLI::ExistingFile(path);
        },
        "FILE");
  };

  DepthOpts depth;
  auto* sd = app.add_subcommand("depth", "Scanline DP disparity and depth from a rectified stereo pair");
  sd->add_option("--left", depth.left, "Left PNG")->required()->check(CLI::ExistingFile);
  sd->add_option("--right", depth.right, "Right PNG")->required()->check(CLI::ExistingFile);
  sd->add_option("--calib", depth.calib, "Calibration JSON")->check(input_file("calib"));
  sd->add_option("--max-disparity", depth.max_disparity)->check(CLI::PositiveNumber);
  sd->add_option("--occlusion-cost", depth.occlusion_cost)->check(CLI::NonNegativeNumber);
  sd->add_option("--out", depth.out, "Output directory")->required();

  EncodeOpts enc;
  auto* se = app.add_subcommand("encode", "Write DHG images for every frame of a dataset");
  se->add_option("--dataset", enc.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  se->add_option("--depth-min", enc.depth_min);
  se->add_option("--depth-max", enc.depth_max);
  se->add_option("--height-min", enc.height_min);
  se->add_option("--height-max", enc.height_max);
  se->add_option("--out", enc.out, "Output directory")->required();

  SynthOpts syn;
  auto* ss = app.add_subcommand("synth", "Generate a synthetic RGBD dataset");
  ss->add_option("--config,--spec", syn.config, "Dataset spec JSON")->check(input_file("config"));
  ss->add_option("--seed", syn.seed);
  ss->add_option("--scenes", syn.scenes)->check(CLI::PositiveNumber);
  ss->add_option("--frames", syn.frames)->check(CLI::PositiveNumber);
  ss->add_option("--out", syn.out, "Dataset root to create")->required();

  TrainOpts tr;
  auto* st = app.add_subcommand("train", "Train EgoNet on a dataset");
  st->add_option("--dataset", tr.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  st->add_option("--config", tr.config, "Experiment config (key = value)")->check(input_file("config"));
  st->add_option("--preset", tr.preset)->check(CLI::IsMember({"toy", "paper"}));
  st->add_option("--seed", tr.seed);
  st->add_option("--variant", tr.variant)->check(CLI::IsMember({"full", "single", "nocoords", "noembed"}));
  st->add_option("--holdout", tr.holdout, "Scene excluded from training");
  st->add_option("--out", tr.out, "Output directory")->required();

  EvalOpts ev;
  auto* sv = app.add_subcommand("eval", "Score a checkpoint or a baseline");
  sv->add_option("--dataset", ev.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  auto* ck = sv->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  auto* bl = sv->add_option("--baseline", ev.baseline)->check(CLI::IsMember({"aop", "center", "constant"}));
  ck->excludes(bl);
  sv->add_option("--config", ev.config, "Model config (default: model.cfg beside the checkpoint)")
      ->check(input_file("config"));
  sv->add_option("--scenes", ev.scenes, "Comma-separated scene ids (default: all)");
  sv->add_option("--thresholds", ev.thresholds)->check(CLI::Range(2, 100000));
  sv->add_flag("--per-image", ev.per_image, "Average precision/recall per image instead of pooling");
  sv->add_flag("--no-maps", ev.no_maps, "Skip probability-map PNGs");
  sv->add_option("--out", ev.out, "Output directory")->required();

  AblateOpts ab;
  auto* sa = app.add_subcommand("ablate", "Leave-one-out comparison of all four variants");
  sa->add_option("--dataset", ab.dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  sa->add_option("--config", ab.config, "Experiment config (key = value)")->check(input_file("config"));
  sa->add_option("--preset", ab.preset)->check(CLI::IsMember({"toy", "paper"}));
  sa->add_option("--seed", ab.seed);
  sa->add_option("--thresholds", ab.thresholds)->check(CLI::Range(2, 100000));
  sa->add_option("--out", ab.out, "Output directory")->required();

  ReportOpts rep;
  auto* sr = app.add_subcommand("report", "Merge eval/ablate outputs into one CSV and PR plot");
  sr->add_option("--eval", rep.inputs, "Eval or ablate output directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  sr->add_option("--out", rep.out, "Output directory")->required();

  ReplayOpts rp;
  auto* sp = app.add_subcommand("replay", "Re-run the command recorded in a run.json");
  sp->add_option("--run", rp.run, "run.json")->required()->check(CLI::ExistingFile);
  sp->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*sd) cmd_depth(ctx, depth);
  if (*se) cmd_encode(ctx, enc);
  if (*ss) cmd_synth(ctx, syn);
  if (*st) cmd_train(ctx, tr);
  if (*sv) cmd_eval(ctx, ev);
  if (*sa) cmd_ablate(ctx, ab);
  if (*sr) cmd_report(ctx, rep);
  if (*sp) cmd_replay(rp);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  Context ctx;
  for (int i = 1; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  try {
    return dispatch(ctx, argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "egonet: numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const ShapeError& e) {
    std::cerr << "egonet: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "egonet: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "egonet: " << e.what() << '\n';
    return kDataError;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> ptrs;
  for (const auto& a : args) ptrs.push_back(a.c_str());
  return run(static_cast<int>(ptrs.size()), ptrs.data());
}

}  // namespace egonet::cli
