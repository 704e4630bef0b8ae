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

#include "descnet/curation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "descnet/random.h"
#include "descnet/text.h"

namespace descnet::curation {

void CurationConfig::validate() const {
  if (!(noise_threshold > 0.0 && noise_threshold < 1.0)) {
    throw Error("curation: noise_threshold must lie in (0, 1)");
  }
  if (reference_size < 1) throw Error("curation: reference_size must be >= 1");
}

int NoiseFlags::flagged_count() const {
  return static_cast<int>(std::count(flagged.begin(), flagged.end(), true));
}

NoiseFlags flag_noise(std::span<const int> assignments,
                      std::span<const int> labels, int k, int class_count,
                      double p) {
  if (assignments.size() != labels.size()) {
    throw Error("flag_noise: assignments and labels differ in length");
  }
  std::vector<std::vector<int>> counts(k, std::vector<int>(class_count, 0));
  std::vector<int> known(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    ++counts.at(assignments[i]).at(labels[i]);
    ++known[assignments[i]];
  }
  NoiseFlags out;
  out.flagged.assign(labels.size(), false);
  out.by_class.resize(class_count);
  std::vector<std::vector<int>> cell_of(class_count, std::vector<int>(k, -1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0) continue;
    const int j = assignments[i];
    const double share = static_cast<double>(counts[j][c]) / known[j];
    if (!(share < p)) continue;
    out.flagged[i] = true;
    if (cell_of[c][j] < 0) {
      cell_of[c][j] = static_cast<int>(out.by_class[c].size());
      out.by_class[c].push_back({j, {}});
    }
    out.by_class[c][cell_of[c][j]].members.push_back(static_cast<int>(i));
  }
  for (auto& cells : out.by_class) {
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.cluster < b.cluster; });
  }
  return out;
}

int64_t budget_formula(int64_t q, int64_t n) {
  if (q < 1 || n < 1) throw Error("budget: Q and N must be positive");
  const long double v =
      static_cast<long double>(n) *
      (1.0L + std::log10(static_cast<long double>(q) / static_cast<long double>(n)));
  return static_cast<int64_t>(std::floor(v + 0.5L));
}

Target target_sample_size(int64_t p_count, int64_t q_count, int64_t n) {
  if (n < 1) throw Error("budget: N must be >= 1");
  if (q_count < 0 || q_count > p_count) {
    throw Error("budget: need 0 <= Q <= P, got Q = " + std::to_string(q_count) +
                ", P = " + std::to_string(p_count));
  }
  if (p_count <= n) return {p_count, Condition::kTakeAll};
  if (q_count < n) return {0, Condition::kRecall};
  return {budget_formula(q_count, n), Condition::kComplete};
}

RecallResult recall_filtered(std::span<const FlaggedCell> flagged,
                             int64_t q_count, int64_t n) {
  std::vector<const FlaggedCell*> order;
  for (const auto& cell : flagged) order.push_back(&cell);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->members.size() != b->members.size()) {
      return a->members.size() > b->members.size();
    }
    return a->cluster < b->cluster;
  });
  RecallResult out;
  out.q_count = q_count;
  for (const auto* cell : order) {
    if (out.q_count >= n) break;
    out.clusters.push_back(cell->cluster);
    out.recalled.insert(out.recalled.end(), cell->members.begin(),
                        cell->members.end());
    out.q_count += static_cast<int64_t>(cell->members.size());
  }
  if (out.q_count < n) {
    throw Error("recall: flagged entities cannot bring Q up to N");
  }
  std::sort(out.recalled.begin(), out.recalled.end());
  return out;
}

std::vector<int64_t> apportion(std::span<const int64_t> sizes, int64_t target) {
  const int64_t total = std::accumulate(sizes.begin(), sizes.end(), int64_t{0});
  if (target < 0 || target > total) {
    throw Error("apportion: target " + std::to_string(target) +
                " exceeds available " + std::to_string(total));
  }
  const std::size_t n = sizes.size();
  std::vector<int64_t> alloc(n, 0);
  if (target == 0) return alloc;
  // Exact integer arithmetic: quota_j = target * m_j / total.
  std::vector<int64_t> rem(n, 0);
  int64_t assigned = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const __int128 num = static_cast<__int128>(target) * sizes[j];
    alloc[j] = static_cast<int64_t>(num / total);
    rem[j] = static_cast<int64_t>(num % total);
    assigned += alloc[j];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < target; ++i) {
    ++alloc[order[i]];
    ++assigned;
  }
  int64_t occupied = 0;
  for (auto m : sizes) occupied += m > 0;
  if (target >= occupied) {
    for (std::size_t j = 0; j < n; ++j) {
      if (sizes[j] == 0 || alloc[j] > 0) continue;
      std::size_t donor = 0;
      for (std::size_t d = 1; d < n; ++d) {
        if (alloc[d] > alloc[donor]) donor = d;
      }
      --alloc[donor];
      ++alloc[j];
    }
  }
  return alloc;
}

ProportionalSample proportional_sample(std::span<const ClusterMembers> cells,
                                       int64_t target, uint64_t seed) {
  std::vector<int64_t> sizes;
  for (const auto& c : cells) sizes.push_back(static_cast<int64_t>(c.members.size()));
  ProportionalSample out;
  out.allocation = apportion(sizes, target);
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (out.allocation[j] == 0) continue;
    Rng rng(derive_seed(seed, static_cast<uint64_t>(cells[j].cluster)));
    auto picked = rng.sample(cells[j].members, out.allocation[j]);
    out.selected.insert(out.selected.end(), picked.begin(), picked.end());
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

std::vector<int> sample_balanced(std::span<const int> labels, int class_count,
                                 int n_per_class, uint64_t seed) {
  std::vector<std::vector<int>> by_class(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) by_class.at(labels[i]).push_back(static_cast<int>(i));
  }
  std::vector<int> out;
  for (int c = 0; c < class_count; ++c) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(c)));
    auto picked = rng.sample(by_class[c], static_cast<std::size_t>(n_per_class));
    out.insert(out.end(), picked.begin(), picked.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

CuratedSet curate(std::span<const int> assignments, std::span<const int> labels,
                  int k, int class_count, const CurationConfig& config) {
  config.validate();
  CuratedSet out;
  out.flags = flag_noise(assignments, labels, k, class_count, config.noise_threshold);
  const int64_t n = config.reference_size;

  // Kept and all members per class, bucketed by cluster.
  std::vector<std::vector<std::vector<int>>> kept(
      class_count, std::vector<std::vector<int>>(k));
  std::vector<std::vector<int>> all(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0) continue;
    all[c].push_back(static_cast<int>(i));
    if (!out.flags.flagged[i]) kept[c][assignments[i]].push_back(static_cast<int>(i));
  }
  const uint64_t seed = derive_seed(config.seed, "curate");
  out.allocation.resize(class_count);
  for (int c = 0; c < class_count; ++c) {
    BudgetRow row;
    row.label = c;
    row.p_count = static_cast<int64_t>(all[c].size());
    for (const auto& cell : kept[c]) row.q_count += static_cast<int64_t>(cell.size());
    const Target t = target_sample_size(row.p_count, row.q_count, n);
    row.condition = t.condition;
    if (t.condition == Condition::kTakeAll) {
      row.target = row.p_count;
      row.selected = row.p_count;
      out.selected.insert(out.selected.end(), all[c].begin(), all[c].end());
      std::vector<int64_t> per_cluster(k, 0);
      for (int i : all[c]) ++per_cluster[assignments[i]];
      for (int j = 0; j < k; ++j) {
        if (per_cluster[j] > 0) out.allocation[c].push_back({j, per_cluster[j]});
      }
      out.budget.push_back(row);
      continue;
    }
    int64_t q = row.q_count;
    if (t.condition == Condition::kRecall) {
      const RecallResult r = recall_filtered(out.flags.by_class[c], q, n);
      row.recalled = static_cast<int64_t>(r.recalled.size());
      q = r.q_count;
      for (int i : r.recalled) kept[c][assignments[i]].push_back(i);
    }
    row.target = budget_formula(q, n);
    std::vector<ClusterMembers> cells;
    for (int j = 0; j < k; ++j) {
      if (kept[c][j].empty()) continue;
      std::sort(kept[c][j].begin(), kept[c][j].end());
      cells.push_back({j, kept[c][j]});
    }
    const ProportionalSample s =
        proportional_sample(cells, row.target, derive_seed(seed, static_cast<uint64_t>(c)));
    row.selected = static_cast<int64_t>(s.selected.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (s.allocation[j] > 0) out.allocation[c].push_back({cells[j].cluster, s.allocation[j]});
    }
    out.selected.insert(out.selected.end(), s.selected.begin(), s.selected.end());
    out.budget.push_back(row);
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

std::string format_budget_csv(std::span<const BudgetRow> rows,
                              std::span<const std::string> class_ids) {
  std::string out = "class,P,Q,condition,recalled,target,selected\n";
  for (const auto& r : rows) {
    out += class_ids[r.label] + "," + std::to_string(r.p_count) + "," +
           std::to_string(r.q_count) + "," +
           std::to_string(static_cast<int>(r.condition)) + "," +
           std::to_string(r.recalled) + "," + std::to_string(r.target) + "," +
           std::to_string(r.selected) + "\n";
  }
  return out;
}

}  // namespace descnet::curation
