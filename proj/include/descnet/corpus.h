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

// Entities, the concept taxonomy, description filtering and splits.

#ifndef DESCNET_CORPUS_H_
#define DESCNET_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace descnet::corpus {

// Label value used for entities without a (known) class.
inline constexpr int kUnlabeled = -1;

struct Token {
  std::string word;
  std::optional<std::string> pos;

  bool operator==(const Token&) const = default;
};

struct Entity {
  std::string id;
  std::string name;
  std::string raw_text;
  std::optional<std::string> description;
  std::optional<std::vector<Token>> tokens;
  // Class-ids are leaf ids of the taxonomy.
  std::optional<std::string> label;
  // True class for synthetic corpora. Never used for training.
  std::optional<std::string> audit_label;

  bool is_known() const { return label.has_value(); }
};

using EntityCollection = std::vector<Entity>;

enum class EntityFormat { kJsonl, kTsv };

// Reads entities in file order. Throws Error naming the line on malformed
// records and on duplicate ids.
EntityCollection load_entities(const std::filesystem::path& path,
                               EntityFormat format);
EntityCollection parse_entities(std::string_view text, EntityFormat format);

// Writes JSONL with keys id, name, raw_text, and the optional description,
// tokens, label and audit_label.
void save_entities(const std::filesystem::path& path,
                   const EntityCollection& entities);
std::string format_entities(const EntityCollection& entities);

struct ConceptNode {
  std::string id;
  std::string name;
  int parent = -1;
  bool leaf = false;
  // Catch-all leaf ("VideoWorks-Other"): credited when the gold class sits
  // under the same parent concept.
  bool other = false;
};

class Taxonomy {
 public:
  Taxonomy() = default;

  // Validates the node list: unique ids, parents exist, no cycles, unique
  // leaf names, and at least one leaf. Leaves are indexed in node order.
  static Taxonomy from_nodes(std::vector<ConceptNode> nodes);

  int class_count() const { return static_cast<int>(leaves_.size()); }
  const std::vector<ConceptNode>& nodes() const { return nodes_; }

  // Node of leaf class c.
  const ConceptNode& leaf(int c) const { return nodes_[leaves_.at(c)]; }
  const std::string& class_id(int c) const { return leaf(c).id; }
  std::optional<int> class_index(std::string_view id) const;
  int node_of_leaf(int c) const { return leaves_.at(c); }

  // True if `ancestor` (node index) is a proper ancestor of leaf class c.
  bool is_ancestor(int ancestor, int c) const;

 private:
  std::vector<ConceptNode> nodes_;
  std::vector<int> leaves_;
  std::unordered_map<std::string, int> leaf_by_id_;
};

// Accepts either the JSON forms (nested "children" tree, or a flat "nodes"
// list with parent references) or the indented text form:
//
//   Works
//     VideoWorks
//       * Film
//       * VideoWorks-Other [other]
//
// Leaves are marked with "* "; an optional "| Display name" follows the id.
Taxonomy load_taxonomy(const std::filesystem::path& path);
Taxonomy parse_taxonomy(std::string_view text);
std::string format_taxonomy_json(const Taxonomy& taxonomy);

// Resolves each entity's label against the taxonomy (kUnlabeled when absent).
// Throws on a label that is not a leaf id.
std::vector<int> bind_labels(const EntityCollection& entities,
                             const Taxonomy& taxonomy);
std::vector<int> bind_audit_labels(const EntityCollection& entities,
                                   const Taxonomy& taxonomy);

struct SentenceRules {
  // Terminate a sentence wherever they occur.
  std::vector<std::string> terminators = {"。", "！", "？", "!", "?"};
  // Terminate only when followed by whitespace or the end of text.
  std::vector<std::string> spaced_terminators = {"."};
};

// Prefix of raw_text through the first sentence terminator, or the whole
// text when there is none. Throws on empty input.
std::string first_sentence(std::string_view raw_text,
                           const SentenceRules& rules = {});

// Answers whether the syntactic head of a sentence is a verb.
class HeadAnalyzer {
 public:
  virtual ~HeadAnalyzer() = default;
  virtual bool is_verb_headed(const Entity& entity,
                              std::string_view sentence) const = 0;
};

// Fixed answer; the fallback for plain text and a stub for tests.
class ConstantAnalyzer : public HeadAnalyzer {
 public:
  explicit ConstantAnalyzer(bool answer) : answer_(answer) {}
  bool is_verb_headed(const Entity&, std::string_view) const override {
    return answer_;
  }

 private:
  bool answer_;
};

// Uses the POS tags of pre-tokenized input: verb-headed when the first verb
// tag occurs before any nominal tag. False when tokens or tags are absent.
class PosHeadAnalyzer : public HeadAnalyzer {
 public:
  PosHeadAnalyzer(std::vector<std::string> verb_prefixes = {"V", "v"},
                  std::vector<std::string> noun_prefixes = {"N", "n"})
      : verb_prefixes_(std::move(verb_prefixes)),
        noun_prefixes_(std::move(noun_prefixes)) {}

  bool is_verb_headed(const Entity& entity,
                      std::string_view sentence) const override;

 private:
  std::vector<std::string> verb_prefixes_;
  std::vector<std::string> noun_prefixes_;
};

enum class FilterRule { kNone, kNamePrefix, kVerbHead };
std::string_view rule_name(FilterRule rule);

struct FilterVerdict {
  bool accepted = false;
  FilterRule rule = FilterRule::kNone;
};

// Keeps the first sentence as the description when it begins with the entity
// name (exact, after trimming leading whitespace) or is verb-headed. Sets
// entity.description on acceptance; raw_text is never modified.
FilterVerdict accept_description(Entity& entity, const HeadAnalyzer& analyzer,
                                 const SentenceRules& rules = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Per class, round-half-up(ratio * n) items go to train. Indices refer to
// positions in `labels` and come back sorted.
Split split_stratified(const std::vector<int>& labels, double ratio,
                       uint64_t seed);

}  // namespace descnet::corpus

#endif  // DESCNET_CORPUS_H_
