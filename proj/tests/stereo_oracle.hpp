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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "egonet/rng.hpp"

namespace egonet::testutil {

// Exhaustive minimum over monotone matchings: left x pairs with right x - d,
// 0 <= d <= dmax, right indices strictly increasing. Every unmatched pixel on
// either side pays the occlusion cost.
inline double brute_force_cost(const std::vector<double>& l, const std::vector<double>& r, int dmax, double occ) {
  const int n = static_cast<int>(l.size());
  double best = std::numeric_limits<double>::infinity();
  auto dfs = [&](auto&& self, int x, int last_right, double match_cost, int matches) -> void {
    if (x == n) {
      best = std::min(best, match_cost + 2.0 * occ * (n - matches));
      return;
    }
    self(self, x + 1, last_right, match_cost, matches);
    for (int d = 0; d <= dmax; ++d) {
      int j = x - d;
      if (j < 0 || j <= last_right) continue;
      self(self, x + 1, j, match_cost + std::abs(l[x] - r[j]), matches + 1);
    }
  };
  dfs(dfs, 0, -1, 0.0, 0);
  return best;
}

inline std::vector<double> unique_texture(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (static_cast<double>(i) + rng.uniform(0.05, 0.95)) / n;
  for (std::size_t i = n; i-- > 1;) std::swap(v[i], v[rng.below(i + 1)]);
  return v;
}

}  // namespace egonet::testutil
