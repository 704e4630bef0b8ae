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

#include "descnet/confidence.h"

#include <algorithm>
#include <map>

#include "descnet/random.h"
#include "descnet/text.h"

namespace descnet::confidence {

PrfReport macro_prf(std::span<const int> predicted, std::span<const int> gold,
                    int class_count) {
  if (predicted.size() != gold.size()) {
    throw Error("macro_prf: " + std::to_string(predicted.size()) +
                " predictions for " + std::to_string(gold.size()) + " labels");
  }
  std::vector<int> tp(class_count, 0);
  PrfReport r;
  r.per_class.resize(class_count);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= class_count || predicted[i] < 0 ||
        predicted[i] >= class_count) {
      throw Error("macro_prf: label out of range");
    }
    ++r.per_class[gold[i]].support;
    ++r.per_class[predicted[i]].predicted;
    if (gold[i] == predicted[i]) ++tp[gold[i]];
  }
  for (int c = 0; c < class_count; ++c) {
    ClassPrf& m = r.per_class[c];
    if (m.predicted > 0) m.precision = static_cast<double>(tp[c]) / m.predicted;
    if (m.support > 0) m.recall = static_cast<double>(tp[c]) / m.support;
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  if (class_count > 0) {
    r.macro_precision /= class_count;
    r.macro_recall /= class_count;
    r.macro_f1 /= class_count;
  }
  return r;
}

std::string level_name(Level level) {
  return "L" + std::to_string(static_cast<int>(level));
}

Level parse_level(std::string_view name) {
  if (name.size() == 2 && name[0] == 'L' && name[1] >= '1' && name[1] <= '6') {
    return static_cast<Level>(name[1] - '0');
  }
  throw Error("unknown confidence level \"" + std::string(name) + "\"");
}

Level level_for_known_share(double s) {
  if (s > 0.99) return Level::kL1;
  if (s >= 0.5) return Level::kL2;
  if (s >= 0.05) return Level::kL3;
  return Level::kL4;
}

Level level_for_unknown_share(double s) {
  return s > 0.5 ? Level::kL5 : Level::kL6;
}

std::vector<ClusterComposition> compositions(std::span<const int> assignments,
                                             std::span<const int> labels,
                                             std::span<const int> predicted,
                                             int k, int class_count) {
  if (assignments.size() != labels.size() ||
      assignments.size() != predicted.size()) {
    throw Error("compositions: inputs differ in length");
  }
  std::vector<ClusterComposition> out(k);
  for (auto& c : out) {
    c.known_counts.assign(class_count, 0);
    c.predicted_counts.assign(class_count, 0);
  }
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    ClusterComposition& c = out.at(assignments[i]);
    if (labels[i] >= 0) {
      ++c.known_counts.at(labels[i]);
      ++c.known;
    } else if (predicted[i] >= 0) {
      ++c.predicted_counts.at(predicted[i]);
      ++c.unknown;
    }
  }
  return out;
}

GradedPrediction grade(std::string id, int label, double prob, int cluster,
                       const ClusterComposition& comp) {
  GradedPrediction g;
  g.id = std::move(id);
  g.label = label;
  g.prob = prob;
  g.cluster = cluster;
  if (comp.known > 0) {
    g.share = static_cast<double>(comp.known_counts.at(label)) / comp.known;
    g.level = level_for_known_share(g.share);
  } else {
    if (comp.unknown == 0) {
      throw Error("grade: cluster " + std::to_string(cluster) + " is empty");
    }
    g.share = static_cast<double>(comp.predicted_counts.at(label)) / comp.unknown;
    g.level = level_for_unknown_share(g.share);
  }
  return g;
}

std::vector<Group> group_predictions(std::span<const GradedPrediction> graded) {
  std::map<std::pair<int, int>, Group> groups;
  for (std::size_t i = 0; i < graded.size(); ++i) {
    const auto key = std::make_pair(graded[i].label, static_cast<int>(graded[i].level));
    Group& g = groups[key];
    g.label = graded[i].label;
    g.level = graded[i].level;
    g.members.push_back(static_cast<int>(i));
  }
  std::vector<Group> out;
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  return out;
}

double estimate_p1(int64_t m, int64_t r) {
  if (m < 1) throw Error("estimate_p1: m must be >= 1");
  if (r < 0 || r > m) throw Error("estimate_p1: need 0 <= r <= m");
  return static_cast<double>(r) / static_cast<double>(m);
}

double estimate_p2(std::span<const WeightedPrecision> groups) {
  double num = 0.0;
  int64_t den = 0;
  for (const auto& g : groups) {
    if (g.n < 0 || g.p < 0.0 || g.p > 1.0) {
      throw Error("estimate_p2: need n >= 0 and p in [0, 1]");
    }
    num += g.p * static_cast<double>(g.n);
    den += g.n;
  }
  if (den == 0) throw Error("estimate_p2: total group size is zero");
  return num / static_cast<double>(den);
}

double estimate_p2(std::span<const Group> groups) {
  std::vector<WeightedPrecision> w;
  for (const auto& g : groups) {
    if (g.evaluated) w.push_back({g.size(), g.precision});
  }
  return estimate_p2(w);
}

bool other_credit(int predicted, int gold, const corpus::Taxonomy& taxonomy) {
  if (predicted == gold) return true;
  const corpus::ConceptNode& leaf = taxonomy.leaf(predicted);
  return leaf.other && leaf.parent >= 0 && taxonomy.is_ancestor(leaf.parent, gold);
}

std::vector<int> sample_for_evaluation(const Group& group,
                                       const EvaluationConfig& config,
                                       uint64_t seed) {
  if (group.size() < config.min_group_size) return {};
  if (config.exhaustive) return group.members;
  const int m = std::min(group.size(), std::max(config.min_sample, config.sample_size));
  Rng rng(seed);
  auto picked = rng.sample(group.members, static_cast<std::size_t>(m));
  std::sort(picked.begin(), picked.end());
  return picked;
}

namespace {

uint64_t group_seed(uint64_t seed, const Group& g) {
  return derive_seed(derive_seed(seed, static_cast<uint64_t>(g.label)),
                     static_cast<uint64_t>(g.level));
}

}  // namespace

void evaluate_groups(std::span<Group> groups,
                     std::span<const GradedPrediction> graded,
                     std::span<const int> gold,
                     const corpus::Taxonomy& taxonomy,
                     const EvaluationConfig& config) {
  if (graded.size() != gold.size()) {
    throw Error("evaluate_groups: graded and gold differ in length");
  }
  for (auto& g : groups) {
    const auto sample = sample_for_evaluation(g, config, group_seed(config.seed, g));
    g.evaluated = !sample.empty();
    g.sampled = static_cast<int>(sample.size());
    g.correct = 0;
    for (int i : sample) {
      g.correct += other_credit(graded[i].label, gold[i], taxonomy) ? 1 : 0;
    }
    g.precision = g.evaluated ? estimate_p1(g.sampled, g.correct) : 0.0;
  }
}

std::vector<ClassEstimate> estimate_classes(
    std::span<const Group> groups, std::span<const GradedPrediction> graded,
    std::span<const int> gold, const corpus::Taxonomy& taxonomy,
    const EvaluationConfig& config, double threshold) {
  const int classes = taxonomy.class_count();
  std::vector<ClassEstimate> out(classes);
  std::vector<std::vector<int>> members(classes);
  for (std::size_t i = 0; i < graded.size(); ++i) {
    members.at(graded[i].label).push_back(static_cast<int>(i));
  }
  for (int c = 0; c < classes; ++c) {
    ClassEstimate& e = out[c];
    e.label = c;
    e.predictions = static_cast<int64_t>(members[c].size());
    if (!members[c].empty()) {
      std::vector<int> sample = members[c];
      if (!config.exhaustive) {
        const int m = std::max(config.min_sample, config.sample_size);
        Rng rng(derive_seed(derive_seed(config.seed, "class"), static_cast<uint64_t>(c)));
        sample = rng.sample(std::move(sample), static_cast<std::size_t>(m));
      }
      e.m = static_cast<int64_t>(sample.size());
      for (int i : sample) e.r += other_credit(c, gold[i], taxonomy) ? 1 : 0;
      e.p1 = estimate_p1(e.m, e.r);
    }
    std::vector<WeightedPrecision> w;
    for (const auto& g : groups) {
      if (g.label != c || !g.evaluated) continue;
      w.push_back({g.size(), g.precision});
      if (g.precision > threshold) e.accepted += g.size();
    }
    if (!w.empty()) e.p2 = estimate_p2(w);
  }
  return out;
}

std::vector<int> select_groups(std::span<const Group> groups, double threshold) {
  std::vector<int> out;
  for (const auto& g : groups) {
    if (g.evaluated && g.precision > threshold) {
      out.insert(out.end(), g.members.begin(), g.members.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace descnet::confidence
