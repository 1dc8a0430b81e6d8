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

#include "egonet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace egonet {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.flagged == 0; });
}

namespace {

double evaluate(const GraphBuilder& build, const std::vector<NamedTensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.value, true));
  return tape.value(build(tape, vars))[0];
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, std::vector<NamedTensor> params,
                           const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p.value, true));
    tape.backward(build(tape, vars));
    for (Var v : vars) {
      analytic.push_back(tape.has_grad(v) ? tape.grad(v) : Tensor(tape.value(v).shape()));
    }
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    GradCheckEntry entry;
    entry.name = params[pi].name;
    const std::size_t n = params[pi].value.size();
    const std::size_t count =
        options.max_elements_per_param == 0 ? n : std::min(n, options.max_elements_per_param);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == n ? k : k * n / count;
      double& slot = params[pi].value[i];
      const double saved = slot;
      slot = saved + options.eps;
      const double fp = evaluate(build, params);
      slot = saved - options.eps;
      const double fm = evaluate(build, params);
      slot = saved;
      const double numeric = (fp - fm) / (2.0 * options.eps);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
      ++entry.checked;
      if (rel > options.tol) ++entry.flagged;
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace egonet
