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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "egonet/autograd.hpp"
#include "egonet/rng.hpp"
#include "egonet/tensor.hpp"

namespace egonet::model {

enum class LayerKind { kConv, kRelu, kPool };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  int channels = 0;  // conv output channels

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Pathway grammar, whitespace separated:
//   conv<k>x<k>:<channels>[:s<stride>][:d<dilation>]   relu   pool<k>
std::vector<LayerSpec> parse_pathway(std::string_view text);
std::string format_pathway(const std::vector<LayerSpec>& layers);

enum class Variant { kFull, kSingleStream, kNoCoords, kNoEmbed };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);
inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoCoords, Variant::kNoEmbed,
                                           Variant::kSingleStream};

inline constexpr int kOutputStride = 8;

struct EgoNetConfig {
  std::size_t input_height = 64;
  std::size_t input_width = 64;
  std::vector<LayerSpec> rgb_pathway;
  std::vector<LayerSpec> dhg_pathway;
  int embed_channels = 32;
  int blend_channels = 32;
  double dropout_rate = 0.5;
  Variant variant = Variant::kFull;

  // conv3x3(16)-relu-pool2, conv3x3(32)-relu-pool2, conv3x3(64)-relu-pool2,
  // conv3x3(64, dilation 2)-relu for both pathways, no dropout.
  static EgoNetConfig toy();

  // Paper-consistent geometry: 312 x 312 input, 39 x 39 feature maps, dropout 0.5.
  static EgoNetConfig paper_geometry();

  int feature_channels() const;

  // Throws ShapeError if a pathway's composed stride is not 8, pathways
  // disagree in width, or the input size is not divisible by 8.
  void validate() const;

  friend bool operator==(const EgoNetConfig&, const EgoNetConfig&) = default;
};

// Human-readable "key = value" text.
EgoNetConfig parse_config(std::string_view text);
std::string format_config(const EgoNetConfig& config);
EgoNetConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const EgoNetConfig& config);
std::uint64_t config_digest(const EgoNetConfig& config);

/// First-person coordinate mesh-grids at feature resolution, in [-1, 1].
struct CoordGrids {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> x;  // row-major; increases left to right
  std::vector<double> y;  // increases top to bottom

  // B x 2 x height x width tensor with channels (x, y).
  Tensor as_tensor(std::size_t batch) const;
};

CoordGrids build_coord_grids(std::size_t input_height, std::size_t input_width,
                             std::size_t factor = kOutputStride);

using EgoNetParams = std::map<std::string, Tensor>;

struct Mode {
  bool training = false;
  double dropout_rate = 0.5;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

struct ForwardVars {
  Var features_a;      // rgb (or single-stream) pathway features
  Var features_b;      // dhg pathway features; equals features_a for single stream
  Var logits_lowres;   // B x 2 x h x w
  Var logits;          // B x 2 x H x W
  std::map<std::string, Var> params;
};

class EgoNet {
 public:
  explicit EgoNet(EgoNetConfig config);

  const EgoNetConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  // Name -> shape of every learnable tensor for this variant.
  std::map<std::string, Shape> param_shapes() const;
  // He-normal weights, zero biases.
  EgoNetParams init_params(std::uint64_t seed) const;
  void check_params(const EgoNetParams& params) const;

  // Records the full forward graph on the tape. Parameters become tape leaves.
  ForwardVars record(Tape& tape, const Tensor& rgb, const Tensor& dhg, const EgoNetParams& params,
                     const Mode& mode) const;
  // Same, with parameters already on the tape (keyed as in param_shapes).
  ForwardVars record(Tape& tape, const Tensor& rgb, const Tensor& dhg,
                     std::map<std::string, Var> params, const Mode& mode) const;

  // Action-object probability (softmax channel 1), B x H x W.
  Tensor predict(const Tensor& rgb, const Tensor& dhg, const EgoNetParams& params) const;

  // Pieces, exposed for tests.
  Var pathway_forward(Tape& tape, Var input, const std::string& prefix,
                      const std::vector<LayerSpec>& layers,
                      const std::map<std::string, Var>& vars) const;
  Var joint_forward(Tape& tape, Var feat_a, Var feat_b, const CoordGrids& coords,
                    const std::map<std::string, Var>& vars, const Mode& mode) const;

 private:
  EgoNetConfig config_;
};

// Versioned binary checkpoint: magic, version, config digest, named tensors.
struct Checkpoint {
  std::uint64_t config_digest = 0;
  EgoNetParams params;
};
void save_checkpoint(const std::filesystem::path& path, const EgoNetConfig& config,
                     const EgoNetParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace egonet::model
