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

#include "descnet/corpus.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "descnet/random.h"
#include "descnet/text.h"
#include "json.hpp"

namespace descnet::corpus {

using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error("line " + std::to_string(line) + ": missing string field \"" +
                key + "\"");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key,
                                           std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error("line " + std::to_string(line) + ": field \"" + key +
                "\" must be a string");
  }
  return it->get<std::string>();
}

Entity parse_jsonl_record(std::string_view text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("line " + std::to_string(line) + ": " + e.what());
  }
  if (!j.is_object()) {
    throw Error("line " + std::to_string(line) + ": record is not an object");
  }
  Entity e;
  e.id = required_string(j, "id", line);
  e.name = required_string(j, "name", line);
  e.raw_text = required_string(j, "raw_text", line);
  e.description = optional_string(j, "description", line);
  e.label = optional_string(j, "label", line);
  e.audit_label = optional_string(j, "audit_label", line);
  if (auto it = j.find("tokens"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) {
      throw Error("line " + std::to_string(line) + ": tokens must be a list");
    }
    std::vector<Token> tokens;
    for (const auto& t : *it) {
      if (t.is_string()) {
        tokens.push_back({t.get<std::string>(), std::nullopt});
        continue;
      }
      if (!t.is_array() || t.empty() || t.size() > 2 || !t[0].is_string() ||
          (t.size() == 2 && !t[1].is_null() && !t[1].is_string())) {
        throw Error("line " + std::to_string(line) +
                    ": tokens must be [word, pos] pairs");
      }
      Token tok{t[0].get<std::string>(), std::nullopt};
      if (t.size() == 2 && t[1].is_string()) tok.pos = t[1].get<std::string>();
      tokens.push_back(std::move(tok));
    }
    e.tokens = std::move(tokens);
  }
  return e;
}

Entity parse_tsv_record(std::string_view text, std::size_t line) {
  // id, name, label, raw_text. raw_text may itself contain no tabs.
  auto fields = split(text, '\t');
  if (fields.size() != 4) {
    throw Error("line " + std::to_string(line) + ": expected 4 tab-separated " +
                "fields, got " + std::to_string(fields.size()));
  }
  if (fields[0].empty() || fields[1].empty()) {
    throw Error("line " + std::to_string(line) + ": empty id or name");
  }
  Entity e;
  e.id = fields[0];
  e.name = fields[1];
  if (!fields[2].empty()) e.label = fields[2];
  e.raw_text = fields[3];
  return e;
}

}  // namespace

EntityCollection parse_entities(std::string_view text, EntityFormat format) {
  EntityCollection out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    Entity e = format == EntityFormat::kJsonl ? parse_jsonl_record(line, line_no)
                                              : parse_tsv_record(line, line_no);
    if (!seen.insert(e.id).second) {
      throw Error("line " + std::to_string(line_no) + ": duplicate id \"" +
                  e.id + "\"");
    }
    out.push_back(std::move(e));
  }
  return out;
}

EntityCollection load_entities(const std::filesystem::path& path,
                               EntityFormat format) {
  try {
    return parse_entities(read_file(path), format);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_entities(const EntityCollection& entities) {
  std::string out;
  for (const Entity& e : entities) {
    json j = json::object();
    j["id"] = e.id;
    j["name"] = e.name;
    j["raw_text"] = e.raw_text;
    if (e.description) j["description"] = *e.description;
    if (e.tokens) {
      json toks = json::array();
      for (const Token& t : *e.tokens) {
        toks.push_back(json::array(
            {t.word, t.pos ? json(*t.pos) : json(nullptr)}));
      }
      j["tokens"] = std::move(toks);
    }
    if (e.label) j["label"] = *e.label;
    if (e.audit_label) j["audit_label"] = *e.audit_label;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_entities(const std::filesystem::path& path,
                   const EntityCollection& entities) {
  write_file(path, format_entities(entities));
}

// --- Taxonomy ---------------------------------------------------------------

Taxonomy Taxonomy::from_nodes(std::vector<ConceptNode> nodes) {
  Taxonomy t;
  const int n = static_cast<int>(nodes.size());
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> leaf_names;
  for (int i = 0; i < n; ++i) {
    const ConceptNode& node = nodes[i];
    if (node.id.empty()) throw Error("taxonomy: node with empty id");
    if (!ids.insert(node.id).second) {
      throw Error("taxonomy: duplicate node id \"" + node.id + "\"");
    }
    if (node.parent < -1 || node.parent >= n) {
      throw Error("taxonomy: node \"" + node.id + "\" has an invalid parent");
    }
  }
  for (int i = 0; i < n; ++i) {
    int cur = nodes[i].parent;
    for (int steps = 0; cur != -1; ++steps) {
      if (steps > n || cur == i) {
        throw Error("taxonomy: cycle through node \"" + nodes[i].id + "\"");
      }
      cur = nodes[cur].parent;
    }
  }
  std::vector<bool> has_children(n, false);
  for (const auto& node : nodes) {
    if (node.parent >= 0) has_children[node.parent] = true;
  }
  for (int i = 0; i < n; ++i) {
    ConceptNode& node = nodes[i];
    if (node.name.empty()) node.name = node.id;
    if (!node.leaf) {
      if (node.other) {
        throw Error("taxonomy: \"" + node.id + "\" is marked other but not leaf");
      }
      continue;
    }
    if (has_children[i]) {
      throw Error("taxonomy: leaf \"" + node.id + "\" has children");
    }
    if (!leaf_names.insert(node.name).second) {
      throw Error("taxonomy: duplicate leaf \"" + node.name + "\"");
    }
    t.leaf_by_id_[node.id] = static_cast<int>(t.leaves_.size());
    t.leaves_.push_back(i);
  }
  if (t.leaves_.empty()) throw Error("taxonomy: no leaves");
  t.nodes_ = std::move(nodes);
  return t;
}

std::optional<int> Taxonomy::class_index(std::string_view id) const {
  auto it = leaf_by_id_.find(std::string(id));
  if (it == leaf_by_id_.end()) return std::nullopt;
  return it->second;
}

bool Taxonomy::is_ancestor(int ancestor, int c) const {
  int cur = nodes_[leaves_.at(c)].parent;
  while (cur != -1) {
    if (cur == ancestor) return true;
    cur = nodes_[cur].parent;
  }
  return false;
}

namespace {

void add_tree(const json& j, int parent, std::vector<ConceptNode>& nodes) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw Error("taxonomy: every node needs a string \"id\"");
  }
  ConceptNode node;
  node.id = j["id"].get<std::string>();
  node.name = j.value("name", node.id);
  node.parent = parent;
  node.leaf = j.value("leaf", false);
  node.other = j.value("other", false);
  const int self = static_cast<int>(nodes.size());
  nodes.push_back(node);
  if (auto it = j.find("children"); it != j.end()) {
    if (!it->is_array()) throw Error("taxonomy: children must be a list");
    for (const auto& child : *it) add_tree(child, self, nodes);
  }
}

std::vector<ConceptNode> parse_json_nodes(const json& j) {
  std::vector<ConceptNode> nodes;
  if (j.is_object() && j.contains("nodes")) {
    // Flat form with parent ids; this is the form in which cycles can occur.
    std::unordered_map<std::string, int> index;
    const auto& list = j["nodes"];
    if (!list.is_array()) throw Error("taxonomy: nodes must be a list");
    for (const auto& item : list) {
      if (!item.is_object() || !item.contains("id")) {
        throw Error("taxonomy: every node needs an \"id\"");
      }
      ConceptNode node;
      node.id = item["id"].get<std::string>();
      node.name = item.value("name", node.id);
      node.leaf = item.value("leaf", false);
      node.other = item.value("other", false);
      if (!index.emplace(node.id, static_cast<int>(nodes.size())).second) {
        throw Error("taxonomy: duplicate node id \"" + node.id + "\"");
      }
      nodes.push_back(std::move(node));
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& item = list[i];
      if (!item.contains("parent") || item["parent"].is_null()) continue;
      auto it = index.find(item["parent"].get<std::string>());
      if (it == index.end()) {
        throw Error("taxonomy: unknown parent of \"" + nodes[i].id + "\"");
      }
      nodes[i].parent = it->second;
    }
    return nodes;
  }
  if (j.is_array()) {
    for (const auto& root : j) add_tree(root, -1, nodes);
  } else {
    add_tree(j, -1, nodes);
  }
  return nodes;
}

std::vector<ConceptNode> parse_text_nodes(std::string_view text) {
  std::vector<ConceptNode> nodes;
  std::vector<std::pair<std::size_t, int>> stack;  // (indent, node)
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::size_t indent = 0;
    while (indent < line.size() && (line[indent] == ' ' || line[indent] == '\t')) {
      if (line[indent] == '\t') {
        throw Error("taxonomy line " + std::to_string(line_no) +
                    ": use spaces for indentation");
      }
      ++indent;
    }
    ConceptNode node;
    if (body.starts_with("* ")) {
      node.leaf = true;
      body = trim(body.substr(2));
    }
    constexpr std::string_view kOther = "[other]";
    if (body.ends_with(kOther)) {
      node.other = true;
      body = trim(body.substr(0, body.size() - kOther.size()));
    }
    if (auto bar = body.find('|'); bar != std::string_view::npos) {
      node.name = std::string(trim(body.substr(bar + 1)));
      body = trim(body.substr(0, bar));
    }
    node.id = std::string(body);
    if (node.id.empty()) {
      throw Error("taxonomy line " + std::to_string(line_no) + ": empty id");
    }
    while (!stack.empty() && stack.back().first >= indent) stack.pop_back();
    node.parent = stack.empty() ? -1 : stack.back().second;
    stack.emplace_back(indent, static_cast<int>(nodes.size()));
    nodes.push_back(std::move(node));
  }
  return nodes;
}

}  // namespace

Taxonomy parse_taxonomy(std::string_view text) {
  std::string_view body = trim(text);
  if (!body.empty() && (body.front() == '{' || body.front() == '[')) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      throw Error(std::string("taxonomy: ") + e.what());
    }
    try {
      return Taxonomy::from_nodes(parse_json_nodes(j));
    } catch (const json::exception& e) {
      throw Error(std::string("taxonomy: ") + e.what());
    }
  }
  return Taxonomy::from_nodes(parse_text_nodes(text));
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(read_file(path));
}

std::string format_taxonomy_json(const Taxonomy& taxonomy) {
  json list = json::array();
  const auto& nodes = taxonomy.nodes();
  for (const ConceptNode& n : nodes) {
    json j = {{"id", n.id}, {"name", n.name}};
    j["parent"] = n.parent >= 0 ? json(nodes[n.parent].id) : json(nullptr);
    if (n.leaf) j["leaf"] = true;
    if (n.other) j["other"] = true;
    list.push_back(std::move(j));
  }
  return json{{"nodes", std::move(list)}}.dump(2) + "\n";
}

namespace {

std::vector<int> bind(const EntityCollection& entities, const Taxonomy& taxonomy,
                      std::optional<std::string> Entity::*field) {
  std::vector<int> out;
  out.reserve(entities.size());
  for (const Entity& e : entities) {
    const auto& label = e.*field;
    if (!label) {
      out.push_back(kUnlabeled);
      continue;
    }
    auto c = taxonomy.class_index(*label);
    if (!c) {
      throw Error("entity \"" + e.id + "\": unknown class-id \"" + *label + "\"");
    }
    out.push_back(*c);
  }
  return out;
}

}  // namespace

std::vector<int> bind_labels(const EntityCollection& entities,
                             const Taxonomy& taxonomy) {
  return bind(entities, taxonomy, &Entity::label);
}

std::vector<int> bind_audit_labels(const EntityCollection& entities,
                                   const Taxonomy& taxonomy) {
  return bind(entities, taxonomy, &Entity::audit_label);
}

// --- Description filter -----------------------------------------------------

std::string first_sentence(std::string_view raw_text,
                           const SentenceRules& rules) {
  if (raw_text.empty()) throw Error("first_sentence: empty text");
  std::size_t pos = 0;
  while (pos < raw_text.size()) {
    std::string_view rest = raw_text.substr(pos);
    for (const std::string& t : rules.terminators) {
      if (!t.empty() && rest.starts_with(t)) {
        return std::string(raw_text.substr(0, pos + t.size()));
      }
    }
    for (const std::string& t : rules.spaced_terminators) {
      if (t.empty() || !rest.starts_with(t)) continue;
      const std::size_t end = pos + t.size();
      if (end == raw_text.size() || is_space(raw_text[end])) {
        return std::string(raw_text.substr(0, end));
      }
    }
    pos += utf8_length(raw_text, pos);
  }
  return std::string(raw_text);
}

bool PosHeadAnalyzer::is_verb_headed(const Entity& entity,
                                     std::string_view) const {
  if (!entity.tokens) return false;
  auto matches = [](const std::string& tag, const std::vector<std::string>& ps) {
    return std::any_of(ps.begin(), ps.end(),
                       [&](const std::string& p) { return tag.starts_with(p); });
  };
  for (const Token& t : *entity.tokens) {
    if (!t.pos) continue;
    if (matches(*t.pos, noun_prefixes_)) return false;
    if (matches(*t.pos, verb_prefixes_)) return true;
  }
  return false;
}

std::string_view rule_name(FilterRule rule) {
  switch (rule) {
    case FilterRule::kNamePrefix:
      return "name_prefix";
    case FilterRule::kVerbHead:
      return "verb_head";
    case FilterRule::kNone:
      break;
  }
  return "none";
}

FilterVerdict accept_description(Entity& entity, const HeadAnalyzer& analyzer,
                                 const SentenceRules& rules) {
  FilterVerdict verdict;
  if (entity.raw_text.empty()) return verdict;
  std::string sentence = first_sentence(entity.raw_text, rules);
  if (!entity.name.empty() && trim_left(sentence).starts_with(entity.name)) {
    verdict = {true, FilterRule::kNamePrefix};
  } else if (analyzer.is_verb_headed(entity, sentence)) {
    verdict = {true, FilterRule::kVerbHead};
  }
  if (verdict.accepted) entity.description = std::move(sentence);
  return verdict;
}

// --- Splits -----------------------------------------------------------------

Split split_stratified(const std::vector<int>& labels, double ratio,
                       uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error("split_stratified: ratio must lie in (0, 1)");
  }
  int classes = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw Error("split_stratified: unlabeled entity at position " +
                  std::to_string(i));
    }
    classes = std::max(classes, labels[i] + 1);
  }
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(seed);
  Split split;
  for (auto& members : by_class) {
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(members.size()) + 0.5 + 1e-9));
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < n_train ? split.train : split.validation).push_back(members[k]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace descnet::corpus
