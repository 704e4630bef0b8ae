// Copyright 2026 The descnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference computations used by the tests.

#ifndef DESCNET_TESTS_ORACLES_H_
#define DESCNET_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "descnet/kmeans.h"

namespace descnet::testing {

// Adjusted Rand index between two labelings of the same points.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, int64_t> joint;
  std::map<int, int64_t> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  auto pairs = [](int64_t n) { return static_cast<double>(n) * (n - 1) / 2.0; };
  double sum_joint = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, n] : joint) sum_joint += pairs(n);
  for (const auto& [k, n] : ca) sum_a += pairs(n);
  for (const auto& [k, n] : cb) sum_b += pairs(n);
  const double total = pairs(static_cast<int64_t>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = (sum_a + sum_b) / 2.0;
  if (max_index == expected) return 1.0;
  return (sum_joint - expected) / (max_index - expected);
}

// Lowest K-means objective over every assignment of points to k labels
// with all clusters non-empty (tiny inputs only).
inline double brute_force_objective(const cluster::PointMatrix& x, int k,
                                    std::vector<int>* best_assignment = nullptr) {
  const auto n = static_cast<int>(x.rows());
  std::vector<int> a(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> counts(k, 0);
    for (int v : a) ++counts[v];
    if (std::all_of(counts.begin(), counts.end(), [](int c) { return c > 0; })) {
      cluster::PointMatrix means = cluster::PointMatrix::Zero(k, x.cols());
      for (int i = 0; i < n; ++i) means.row(a[i]) += x.row(i);
      for (int j = 0; j < k; ++j) means.row(j) /= counts[j];
      double obj = 0.0;
      for (int i = 0; i < n; ++i) obj += (x.row(i) - means.row(a[i])).squaredNorm();
      if (obj < best) {
        best = obj;
        if (best_assignment) *best_assignment = a;
      }
    }
    int pos = 0;
    while (pos < n && ++a[pos] == k) a[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

// Largest-remainder apportionment computed with exact rational comparison
// by a different route: repeatedly hand the next unit to the position whose
// quota exceeds its allocation the most.
inline std::vector<int64_t> largest_remainder(const std::vector<int64_t>& sizes,
                                              int64_t target) {
  int64_t total = 0;
  for (auto s : sizes) total += s;
  std::vector<int64_t> alloc(sizes.size(), 0);
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    // floor(target * s / total), corrected to exact integer arithmetic.
    alloc[j] = static_cast<int64_t>((static_cast<long double>(target) * sizes[j]) / total);
    while (static_cast<__int128>(alloc[j] + 1) * total <= static_cast<__int128>(target) * sizes[j]) {
      ++alloc[j];
    }
    while (static_cast<__int128>(alloc[j]) * total > static_cast<__int128>(target) * sizes[j]) {
      --alloc[j];
    }
  }
  int64_t given = 0;
  for (auto v : alloc) given += v;
  std::vector<bool> bumped(sizes.size(), false);
  while (given < target) {
    std::size_t pick = sizes.size();
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      if (bumped[j]) continue;
      // remainder_j = target*s_j - alloc_j*total
      const __int128 rj = static_cast<__int128>(target) * sizes[j] -
                          static_cast<__int128>(alloc[j]) * total;
      if (pick == sizes.size()) {
        pick = j;
        continue;
      }
      const __int128 rp = static_cast<__int128>(target) * sizes[pick] -
                          static_cast<__int128>(alloc[pick]) * total;
      if (rj > rp) pick = j;
    }
    bumped[pick] = true;
    ++alloc[pick];
    ++given;
  }
  // Coverage: every occupied position gets one unit, taken from the current
  // largest allocation (lowest position on ties), when the target allows.
  int64_t occupied = 0;
  for (auto s : sizes) occupied += s > 0;
  if (target >= occupied) {
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      if (sizes[j] == 0 || alloc[j] > 0) continue;
      const auto donor = static_cast<std::size_t>(
          std::max_element(alloc.begin(), alloc.end()) - alloc.begin());
      --alloc[donor];
      ++alloc[j];
    }
  }
  return alloc;
}

}  // namespace descnet::testing

#endif  // DESCNET_TESTS_ORACLES_H_
