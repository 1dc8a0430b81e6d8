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

#include "egonet/model.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "egonet/error.hpp"

namespace egonet::model {

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find(sep, start);
    out.push_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int to_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ShapeError("bad integer '" + std::string(s) + "' in " + std::string(what));
  }
  return v;
}

double to_double(std::string_view s, std::string_view what) {
  std::string str(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != str.size() || str.empty()) {
    throw ShapeError("bad number '" + str + "' in " + std::string(what));
  }
  return v;
}

LayerSpec parse_layer(std::string_view tok) {
  LayerSpec l;
  if (tok == "relu") {
    l.kind = LayerKind::kRelu;
    return l;
  }
  if (tok.starts_with("pool")) {
    l.kind = LayerKind::kPool;
    l.kernel = to_int(tok.substr(4), "pool layer");
    l.stride = l.kernel;
    if (l.kernel < 1) throw ShapeError("pool size must be >= 1");
    return l;
  }
  if (tok.starts_with("conv")) {
    l.kind = LayerKind::kConv;
    auto parts = split(tok.substr(4), ':');
    if (parts.size() < 2) throw ShapeError("conv layer needs a channel count: " + std::string(tok));
    auto k = split(parts[0], 'x');
    if (k.size() != 2 || k[0] != k[1]) throw ShapeError("conv kernel must be square: " + std::string(tok));
    l.kernel = to_int(k[0], "conv kernel");
    l.channels = to_int(parts[1], "conv channels");
    for (std::size_t i = 2; i < parts.size(); ++i) {
      if (parts[i].starts_with("s")) {
        l.stride = to_int(parts[i].substr(1), "conv stride");
      } else if (parts[i].starts_with("d")) {
        l.dilation = to_int(parts[i].substr(1), "conv dilation");
      } else {
        throw ShapeError("unknown conv option '" + std::string(parts[i]) + "'");
      }
    }
    if (l.kernel < 1 || l.kernel % 2 == 0) throw ShapeError("conv kernel must be odd and positive");
    if (l.channels < 1 || l.stride < 1 || l.dilation < 1) {
      throw ShapeError("conv channels, stride and dilation must be positive: " + std::string(tok));
    }
    return l;
  }
  throw ShapeError("unknown layer '" + std::string(tok) + "'");
}

int composed_stride(const std::vector<LayerSpec>& layers) {
  int s = 1;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::kRelu) s *= l.stride;
  }
  return s;
}

int last_conv_channels(const std::vector<LayerSpec>& layers) {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (it->kind == LayerKind::kConv) return it->channels;
  }
  return 0;
}

}  // namespace

std::vector<LayerSpec> parse_pathway(std::string_view text) {
  std::vector<LayerSpec> layers;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) layers.push_back(parse_layer(tok));
  return layers;
}

std::string format_pathway(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) os << ' ';
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerKind::kRelu:
        os << "relu";
        break;
      case LayerKind::kPool:
        os << "pool" << l.kernel;
        break;
      case LayerKind::kConv:
        os << "conv" << l.kernel << 'x' << l.kernel << ':' << l.channels;
        if (l.stride != 1) os << ":s" << l.stride;
        if (l.dilation != 1) os << ":d" << l.dilation;
        break;
    }
  }
  return os.str();
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::kFull;
  if (name == "single" || name == "singleStream") return Variant::kSingleStream;
  if (name == "nocoords" || name == "noCoords") return Variant::kNoCoords;
  if (name == "noembed" || name == "noEmbed") return Variant::kNoEmbed;
  throw ShapeError("unknown model variant '" + std::string(name) + "'");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kSingleStream:
      return "single";
    case Variant::kNoCoords:
      return "nocoords";
    case Variant::kNoEmbed:
      return "noembed";
  }
  return "full";
}

EgoNetConfig EgoNetConfig::toy() {
  EgoNetConfig c;
  c.rgb_pathway = parse_pathway(
      "conv3x3:16 relu pool2 conv3x3:32 relu pool2 conv3x3:64 relu pool2 conv3x3:64:d2 relu");
  c.dhg_pathway = c.rgb_pathway;
  c.dropout_rate = 0.0;
  return c;
}

EgoNetConfig EgoNetConfig::paper_geometry() {
  EgoNetConfig c = toy();
  c.dropout_rate = 0.5;
  c.input_height = 312;
  c.input_width = 312;
  return c;
}

int EgoNetConfig::feature_channels() const { return last_conv_channels(rgb_pathway); }

void EgoNetConfig::validate() const {
  if (input_height == 0 || input_width == 0 || input_height % kOutputStride != 0 ||
      input_width % kOutputStride != 0) {
    throw ShapeError("input size " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                     " must be positive and divisible by 8");
  }
  auto check = [](const std::vector<LayerSpec>& layers, const char* name) {
    if (last_conv_channels(layers) == 0) throw ShapeError(std::string(name) + " pathway has no conv layer");
    const int s = composed_stride(layers);
    if (s != kOutputStride) {
      throw ShapeError(std::string(name) + " pathway has composed stride " + std::to_string(s) +
                       ", expected 8");
    }
  };
  check(rgb_pathway, "rgb");
  if (variant != Variant::kSingleStream) {
    check(dhg_pathway, "dhg");
    if (last_conv_channels(dhg_pathway) != last_conv_channels(rgb_pathway)) {
      throw ShapeError("rgb and dhg pathways must produce the same number of feature channels");
    }
  }
  if (embed_channels < 1 || blend_channels < 1) throw ShapeError("joint channel counts must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ShapeError("dropout rate must lie in [0, 1)");
}

EgoNetConfig parse_config(std::string_view text) {
  EgoNetConfig c = EgoNetConfig::toy();
  bool dhg_set = false;
  for (auto raw : split(text, '\n')) {
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ShapeError("config line without '=': " + std::string(line));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "input_height") {
      c.input_height = static_cast<std::size_t>(to_int(value, key));
    } else if (key == "input_width") {
      c.input_width = static_cast<std::size_t>(to_int(value, key));
    } else if (key == "rgb_pathway") {
      c.rgb_pathway = parse_pathway(value);
      if (!dhg_set) c.dhg_pathway = c.rgb_pathway;
    } else if (key == "dhg_pathway") {
      c.dhg_pathway = parse_pathway(value);
      dhg_set = true;
    } else if (key == "embed_channels") {
      c.embed_channels = to_int(value, key);
    } else if (key == "blend_channels") {
      c.blend_channels = to_int(value, key);
    } else if (key == "dropout_rate") {
      c.dropout_rate = to_double(value, key);
    } else if (key == "variant") {
      c.variant = parse_variant(value);
    } else {
      throw ShapeError("unknown config key '" + std::string(key) + "'");
    }
  }
  c.validate();
  return c;
}

std::string format_config(const EgoNetConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "input_height = " << c.input_height << '\n'
     << "input_width = " << c.input_width << '\n'
     << "rgb_pathway = " << format_pathway(c.rgb_pathway) << '\n'
     << "dhg_pathway = " << format_pathway(c.dhg_pathway) << '\n'
     << "embed_channels = " << c.embed_channels << '\n'
     << "blend_channels = " << c.blend_channels << '\n'
     << "dropout_rate = " << c.dropout_rate << '\n'
     << "variant = " << variant_name(c.variant) << '\n';
  return os.str();
}

EgoNetConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ShapeError& e) {
    throw ShapeError(path.string() + ": " + e.what());
  }
}

void save_config(const std::filesystem::path& path, const EgoNetConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config " + path.string());
  out << format_config(config);
}

std::uint64_t config_digest(const EgoNetConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor CoordGrids::as_tensor(std::size_t batch) const {
  Tensor t(Shape{batch, 2, height, width});
  const std::size_t plane = height * width;
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy(x.begin(), x.end(), t.data().begin() + static_cast<std::ptrdiff_t>((2 * n) * plane));
    std::copy(y.begin(), y.end(), t.data().begin() + static_cast<std::ptrdiff_t>((2 * n + 1) * plane));
  }
  return t;
}

namespace {

double grid_value(std::size_t i, std::size_t n) {
  if (n == 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

CoordGrids build_coord_grids(std::size_t input_height, std::size_t input_width, std::size_t factor) {
  if (factor == 0 || input_height == 0 || input_width == 0 || input_height % factor != 0 ||
      input_width % factor != 0) {
    throw ShapeError("coordinate grid input " + std::to_string(input_height) + "x" +
                     std::to_string(input_width) + " is not divisible by " + std::to_string(factor));
  }
  CoordGrids g;
  g.height = input_height / factor;
  g.width = input_width / factor;
  g.x.resize(g.height * g.width);
  g.y.resize(g.height * g.width);
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      g.x[r * g.width + c] = grid_value(c, g.width);
      g.y[r * g.width + c] = grid_value(r, g.height);
    }
  }
  return g;
}

EgoNet::EgoNet(EgoNetConfig config) : config_(std::move(config)) { config_.validate(); }

namespace {

void add_pathway_shapes(std::map<std::string, Shape>& shapes, const std::string& prefix,
                        const std::vector<LayerSpec>& layers, std::size_t in_channels) {
  std::size_t c = in_channels;
  int k = 0;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::kConv) continue;
    const std::string base = prefix + ".conv" + std::to_string(k++);
    const auto ks = static_cast<std::size_t>(l.kernel);
    shapes[base + ".weight"] = {static_cast<std::size_t>(l.channels), c, ks, ks};
    shapes[base + ".bias"] = {static_cast<std::size_t>(l.channels)};
    c = static_cast<std::size_t>(l.channels);
  }
}

}  // namespace

std::map<std::string, Shape> EgoNet::param_shapes() const {
  std::map<std::string, Shape> shapes;
  const auto f = static_cast<std::size_t>(config_.feature_channels());
  const auto e = static_cast<std::size_t>(config_.embed_channels);
  const auto bl = static_cast<std::size_t>(config_.blend_channels);
  std::size_t joint_in = 0;
  switch (config_.variant) {
    case Variant::kSingleStream:
      add_pathway_shapes(shapes, "single", config_.rgb_pathway, 8);
      joint_in = f;
      break;
    case Variant::kNoCoords:
      add_pathway_shapes(shapes, "rgb", config_.rgb_pathway, 3);
      add_pathway_shapes(shapes, "dhg", config_.dhg_pathway, 3);
      joint_in = 2 * f;
      break;
    case Variant::kFull:
    case Variant::kNoEmbed:
      add_pathway_shapes(shapes, "rgb", config_.rgb_pathway, 3);
      add_pathway_shapes(shapes, "dhg", config_.dhg_pathway, 3);
      joint_in = 2 * f + 2;
      break;
  }
  shapes["joint.embed.weight"] = {e, joint_in, 3, 3};
  shapes["joint.embed.bias"] = {e};
  std::size_t cls_in = e;
  if (config_.variant != Variant::kNoEmbed) {
    shapes["joint.blend.weight"] = {bl, e, 3, 3};
    shapes["joint.blend.bias"] = {bl};
    cls_in = bl;
  }
  shapes["joint.classifier.weight"] = {2, cls_in, 1, 1};
  shapes["joint.classifier.bias"] = {2};
  return shapes;
}

EgoNetParams EgoNet::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  EgoNetParams params;
  for (const auto& [name, shape] : param_shapes()) {
    Tensor t(shape, 0.0);
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      const double std = std::sqrt(2.0 / fan_in);
      for (auto& v : t.data()) v = std * rng.normal();
    }
    params.emplace(name, std::move(t));
  }
  return params;
}

void EgoNet::check_params(const EgoNetParams& params) const {
  const auto shapes = param_shapes();
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) +
                       ", expected " + shape_string(shape));
    }
  }
  for (const auto& [name, t] : params) {
    if (!shapes.contains(name)) throw ShapeError("unexpected parameter '" + name + "'");
  }
}

Var EgoNet::pathway_forward(Tape& tape, Var input, const std::string& prefix,
                            const std::vector<LayerSpec>& layers,
                            const std::map<std::string, Var>& vars) const {
  const Shape& in = tape.value(input).shape();
  if (in.size() != 4 || in[2] % kOutputStride != 0 || in[3] % kOutputStride != 0) {
    throw ShapeError("pathway input " + shape_string(in) + " must be NCHW with sides divisible by 8");
  }
  Var h = input;
  int k = 0;
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv: {
        const std::string base = prefix + ".conv" + std::to_string(k++);
        const Conv2dParams p{l.stride, l.dilation * (l.kernel - 1) / 2, l.dilation};
        h = conv2d(tape, h, vars.at(base + ".weight"), vars.at(base + ".bias"), p);
        break;
      }
      case LayerKind::kRelu:
        h = relu(tape, h);
        break;
      case LayerKind::kPool:
        h = maxpool2d(tape, h, l.kernel, l.stride, 0);
        break;
    }
  }
  return h;
}

Var EgoNet::joint_forward(Tape& tape, Var feat_a, Var feat_b, const CoordGrids& coords,
                          const std::map<std::string, Var>& vars, const Mode& mode) const {
  const Shape& fa = tape.value(feat_a).shape();
  const Shape& fb = tape.value(feat_b).shape();
  if (fa[2] != coords.height || fa[3] != coords.width || fb[2] != coords.height ||
      fb[3] != coords.width || fa[0] != fb[0]) {
    throw ShapeError("joint pathway spatial mismatch: rgb " + shape_string(fa) + ", dhg " +
                     shape_string(fb) + ", coords " + std::to_string(coords.height) + "x" +
                     std::to_string(coords.width));
  }
  Rng* rng = mode.rng;
  if (mode.training && mode.dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("training mode with dropout needs a random stream");
  }
  Rng unused(0);
  Rng& r = rng ? *rng : unused;

  Var joint;
  switch (config_.variant) {
    case Variant::kSingleStream:
      joint = feat_a;
      break;
    case Variant::kNoCoords: {
      const Var parts[] = {feat_a, feat_b};
      joint = concat_channels(tape, parts);
      break;
    }
    case Variant::kFull:
    case Variant::kNoEmbed: {
      const Var xy = tape.constant(coords.as_tensor(fa[0]));
      const Var parts[] = {feat_a, feat_b, xy};
      joint = concat_channels(tape, parts);
      break;
    }
  }
  const Conv2dParams same3{1, 1, 1};
  Var h = conv2d(tape, joint, vars.at("joint.embed.weight"), vars.at("joint.embed.bias"), same3);
  h = relu(tape, h);
  h = dropout(tape, h, mode.dropout_rate, mode.training, r);
  if (config_.variant != Variant::kNoEmbed) {
    h = conv2d(tape, h, vars.at("joint.blend.weight"), vars.at("joint.blend.bias"), same3);
    h = relu(tape, h);
    h = dropout(tape, h, mode.dropout_rate, mode.training, r);
  }
  return conv2d(tape, h, vars.at("joint.classifier.weight"), vars.at("joint.classifier.bias"),
                Conv2dParams{1, 0, 1});
}

ForwardVars EgoNet::record(Tape& tape, const Tensor& rgb, const Tensor& dhg,
                           const EgoNetParams& params, const Mode& mode) const {
  check_params(params);
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, tape.leaf(t, true));
  return record(tape, rgb, dhg, std::move(vars), mode);
}

ForwardVars EgoNet::record(Tape& tape, const Tensor& rgb, const Tensor& dhg,
                           std::map<std::string, Var> params, const Mode& mode) const {
  const auto shapes = param_shapes();
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
    if (tape.value(it->second).shape() != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(tape.value(it->second).shape()) +
                       ", expected " + shape_string(shape));
    }
  }
  if (rgb.rank() != 4 || dhg.rank() != 4 || rgb.dim(1) != 3 || dhg.dim(1) != 3 ||
      rgb.dim(0) != dhg.dim(0) || rgb.dim(2) != dhg.dim(2) || rgb.dim(3) != dhg.dim(3)) {
    throw ShapeError("forward expects matching B x 3 x H x W rgb and dhg, got " +
                     shape_string(rgb.shape()) + " and " + shape_string(dhg.shape()));
  }
  const std::size_t batch = rgb.dim(0), height = rgb.dim(2), width = rgb.dim(3);
  const CoordGrids coords = build_coord_grids(height, width);

  ForwardVars out;
  out.params = std::move(params);

  if (config_.variant == Variant::kSingleStream) {
    const CoordGrids full = build_coord_grids(height, width, 1);
    const Tensor* parts[] = {&rgb, &dhg, nullptr};
    const Tensor xy = full.as_tensor(batch);
    parts[2] = &xy;
    const Var input = tape.constant(kernels::concat_channels(parts));
    out.features_a = pathway_forward(tape, input, "single", config_.rgb_pathway, out.params);
    out.features_b = out.features_a;
  } else {
    out.features_a = pathway_forward(tape, tape.constant(rgb), "rgb", config_.rgb_pathway, out.params);
    out.features_b = pathway_forward(tape, tape.constant(dhg), "dhg", config_.dhg_pathway, out.params);
  }
  out.logits_lowres = joint_forward(tape, out.features_a, out.features_b, coords, out.params, mode);
  out.logits = bilinear_upsample(tape, out.logits_lowres, kOutputStride);
  return out;
}

Tensor EgoNet::predict(const Tensor& rgb, const Tensor& dhg, const EgoNetParams& params) const {
  Tape tape;
  const ForwardVars fv = record(tape, rgb, dhg, params, Mode{false, 0.0, nullptr});
  const Tensor& logits = tape.value(fv.logits);
  const std::size_t batch = logits.dim(0), plane = logits.dim(2) * logits.dim(3);
  Tensor probs(Shape{batch, logits.dim(2), logits.dim(3)});
  for (std::size_t n = 0; n < batch; ++n) {
    const double* l0 = logits.data().data() + n * 2 * plane;
    const double* l1 = l0 + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      const double m = std::max(l0[i], l1[i]);
      const double e0 = std::exp(l0[i] - m), e1 = std::exp(l1[i] - m);
      probs[n * plane + i] = e1 / (e0 + e1);
    }
  }
  return probs;
}

namespace {

constexpr char kMagic[8] = {'E', 'G', 'O', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw DataError(path.string() + ": truncated checkpoint");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EgoNetConfig& config,
                     const EgoNetParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, config_digest(config));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw DataError(path.string() + ": not an EgoNet checkpoint");
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_digest = get_le<std::uint64_t>(in, path);
  const auto count = get_le<std::uint32_t>(in, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get_le<std::uint32_t>(in, path);
    if (len > 4096) throw DataError(path.string() + ": corrupt tensor name");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = get_le<std::uint32_t>(in, path);
    if (rank == 0 || rank > 8) throw DataError(path.string() + ": corrupt tensor rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in, path);
    if (shape_numel(shape) > (std::size_t{1} << 30)) {
      throw DataError(path.string() + ": tensor " + name + " too large");
    }
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, path));
    ck.params.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

}  // namespace egonet::model
