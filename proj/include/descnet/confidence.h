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

// Confidence grading of predictions for unknown entities, grouping by
// (class, level), precision estimation and group selection.

#ifndef DESCNET_CONFIDENCE_H_
#define DESCNET_CONFIDENCE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "descnet/corpus.h"
#include "descnet/metrics.h"

namespace descnet::confidence {

// Lower value means higher confidence.
enum class Level { kL1 = 1, kL2, kL3, kL4, kL5, kL6 };

std::string level_name(Level level);
Level parse_level(std::string_view name);

// Share of the cluster's known entities labeled with the predicted class:
// L1 (0.99, 1], L2 [0.5, 0.99], L3 [0.05, 0.5), L4 [0, 0.05).
Level level_for_known_share(double share);
// Share of the cluster's unknown entities predicted as the same class, for
// clusters without known entities: L5 above 0.5, else L6.
Level level_for_unknown_share(double share);

struct ClusterComposition {
  std::vector<int> known_counts;      // per class
  int known = 0;
  std::vector<int> predicted_counts;  // unknown entities, per predicted class
  int unknown = 0;
};

// labels[i] >= 0 for known entities; predicted[i] >= 0 for unknown ones.
std::vector<ClusterComposition> compositions(std::span<const int> assignments,
                                             std::span<const int> labels,
                                             std::span<const int> predicted,
                                             int k, int class_count);

struct GradedPrediction {
  std::string id;
  int label = 0;  // predicted class
  double prob = 0.0;
  int cluster = 0;
  Level level = Level::kL6;
  double share = 0.0;
};

// The unknown-share denominator includes the graded entity itself.
GradedPrediction grade(std::string id, int label, double prob, int cluster,
                       const ClusterComposition& composition);

struct Group {
  int label = 0;
  Level level = Level::kL1;
  std::vector<int> members;  // indices into the graded list
  bool evaluated = false;
  int sampled = 0;
  int correct = 0;
  double precision = 0.0;

  int size() const { return static_cast<int>(members.size()); }
};

// Partition by (class, level), ordered by class then level.
std::vector<Group> group_predictions(std::span<const GradedPrediction> graded);

double estimate_p1(int64_t m, int64_t r);

struct WeightedPrecision {
  int64_t n = 0;
  double p = 0.0;
};
double estimate_p2(std::span<const WeightedPrecision> groups);
// Over the evaluated groups only.
double estimate_p2(std::span<const Group> groups);

// A prediction is credited when it equals gold, or when it is an "Other" leaf
// whose parent concept is an ancestor of gold.
bool other_credit(int predicted, int gold, const corpus::Taxonomy& taxonomy);

struct EvaluationConfig {
  int min_group_size = 100;  // smaller groups are not evaluated
  int min_sample = 40;
  int sample_size = 40;
  bool exhaustive = false;   // judge every member instead of a sample
  uint64_t seed = 1;
};

// Members drawn for judging: min(n_i, max(min_sample, sample_size)), or all
// members in exhaustive mode. Empty when the group is too small.
std::vector<int> sample_for_evaluation(const Group& group,
                                       const EvaluationConfig& config,
                                       uint64_t seed);

// Fills evaluated/sampled/correct/precision for each group by checking the
// sampled members against gold labels (indexed like the graded list).
void evaluate_groups(std::span<Group> groups,
                     std::span<const GradedPrediction> graded,
                     std::span<const int> gold,
                     const corpus::Taxonomy& taxonomy,
                     const EvaluationConfig& config);

// p1 for one class: r correct out of m sampled among all of its predictions.
struct ClassEstimate {
  int label = 0;
  int64_t predictions = 0;
  int64_t m = 0;
  int64_t r = 0;
  std::optional<double> p1;
  std::optional<double> p2;  // over the class's evaluated groups
  int64_t accepted = 0;
};

std::vector<ClassEstimate> estimate_classes(
    std::span<const Group> groups, std::span<const GradedPrediction> graded,
    std::span<const int> gold, const corpus::Taxonomy& taxonomy,
    const EvaluationConfig& config, double threshold);

// Members of evaluated groups with p_i strictly above threshold, sorted.
std::vector<int> select_groups(std::span<const Group> groups, double threshold);

}  // namespace descnet::confidence

#endif  // DESCNET_CONFIDENCE_H_
