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

// Training-set curation from a clustering of the known entities: noise
// flagging, per-class sample budgets, recall of flagged entities, and
// cluster-proportional sampling.
//
// Entities are referred to by their index in the labels/assignments arrays.

#ifndef DESCNET_CURATION_H_
#define DESCNET_CURATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace descnet::curation {

struct CurationConfig {
  double noise_threshold = 0.05;  // p
  int reference_size = 1000;      // N
  uint64_t seed = 1;

  void validate() const;
};

// Flagged members of one class within one cluster.
struct FlaggedCell {
  int cluster = 0;
  std::vector<int> members;
};

struct NoiseFlags {
  std::vector<bool> flagged;  // per entity; unknown entities never flagged
  // Per class, the flagged cells in ascending cluster order.
  std::vector<std::vector<FlaggedCell>> by_class;

  int flagged_count() const;
};

// Within each cluster, a class whose share of the cluster's known entities is
// strictly below p has all of its entities in that cluster flagged.
// labels[i] < 0 marks an unknown entity.
NoiseFlags flag_noise(std::span<const int> assignments,
                      std::span<const int> labels, int k, int class_count,
                      double p);

enum class Condition { kComplete = 1, kRecall = 2, kTakeAll = 3 };

struct Target {
  int64_t size = 0;  // 0 while a recall is pending
  Condition condition = Condition::kComplete;
};

// round_half_up(N * (1 + log10(Q / N))). Requires Q >= 1.
int64_t budget_formula(int64_t q, int64_t n);

// Condition 3 when P <= N, condition 2 when Q < N < P, else condition 1.
Target target_sample_size(int64_t p_count, int64_t q_count, int64_t n);

struct RecallResult {
  std::vector<int> recalled;        // entity indices, sorted
  std::vector<int> clusters;        // recalled clusters in recall order
  int64_t q_count = 0;              // updated Q
};

// Restores whole clusters' flagged entities, most-flagged cluster first (ties
// to the lower cluster id), until Q >= N.
RecallResult recall_filtered(std::span<const FlaggedCell> flagged,
                             int64_t q_count, int64_t n);

// Cluster-level apportionment of `target` samples by largest remainder (ties
// to the lower position), with every occupied cluster receiving at least one
// sample when the target allows.
std::vector<int64_t> apportion(std::span<const int64_t> sizes, int64_t target);

struct ClusterMembers {
  int cluster = 0;
  std::vector<int> members;
};

struct ProportionalSample {
  std::vector<int> selected;  // sorted
  std::vector<int64_t> allocation;  // aligned with the input cells
};

ProportionalSample proportional_sample(std::span<const ClusterMembers> cells,
                                       int64_t target, uint64_t seed);

// min(n_per_class, class size) entities per class, uniformly without
// replacement. Unlabeled entities are ignored. Result sorted.
std::vector<int> sample_balanced(std::span<const int> labels, int class_count,
                                 int n_per_class, uint64_t seed);

struct BudgetRow {
  int label = 0;
  int64_t p_count = 0;
  int64_t q_count = 0;  // before recall
  Condition condition = Condition::kComplete;
  int64_t recalled = 0;
  int64_t target = 0;
  int64_t selected = 0;
};

struct CuratedSet {
  std::vector<int> selected;  // sorted entity indices
  std::vector<BudgetRow> budget;
  // Per class, the number drawn from each cluster.
  std::vector<std::vector<std::pair<int, int64_t>>> allocation;
  NoiseFlags flags;
};

CuratedSet curate(std::span<const int> assignments, std::span<const int> labels,
                  int k, int class_count, const CurationConfig& config);

// CSV with header class,P,Q,condition,recalled,target,selected.
std::string format_budget_csv(std::span<const BudgetRow> rows,
                              std::span<const std::string> class_ids);

}  // namespace descnet::curation

#endif  // DESCNET_CURATION_H_
