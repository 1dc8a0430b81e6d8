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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "egonet/autograd.hpp"

namespace egonet {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t flagged = 0;  // elements with relative error above tol
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error() const;
  bool passed() const;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // 0 checks every element; otherwise an evenly spaced subset of this many
  // elements per parameter.
  std::size_t max_elements_per_param = 0;
};

// Builds a scalar objective on a fresh tape from leaf vars that hold the
// parameters (in the given order). Must be deterministic: any randomness has
// to be re-seeded inside the builder.
using GraphBuilder = std::function<Var(Tape& tape, std::span<const Var> params)>;

// Compares reverse-mode gradients with central differences
// (f(p + eps) - f(p - eps)) / (2 eps), using relative error
// |a - n| / max(|a|, |n|, 1e-12).
GradCheckReport grad_check(const GraphBuilder& build, std::vector<NamedTensor> params,
                           const GradCheckOptions& options = {});

}  // namespace egonet
