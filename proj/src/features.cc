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

#include "descnet/features.h"

#include <charconv>
#include <cmath>

#include "descnet/random.h"
#include "descnet/text.h"

namespace descnet::features {

using corpus::Token;

Vocabulary::Vocabulary() {
  for (std::string_view s : {kPadToken, kStartToken, kEndToken, kUnkToken}) {
    add(s);
  }
  add_pos(kPadToken);
  add_pos(kUnkToken);
}

int Vocabulary::add(std::string_view token) {
  auto [it, inserted] =
      index_.emplace(std::string(token), static_cast<int>(tokens_.size()));
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::index_or_unk(std::string_view token) const {
  return find(token).value_or(kUnk);
}

int Vocabulary::add_pos(std::string_view tag) {
  auto [it, inserted] =
      pos_index_.emplace(std::string(tag), static_cast<int>(pos_tags_.size()));
  if (inserted) pos_tags_.emplace_back(tag);
  return it->second;
}

int Vocabulary::pos_index_or_unk(std::string_view tag) const {
  auto it = pos_index_.find(std::string(tag));
  return it == pos_index_.end() ? 1 : it->second;
}

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char c = s[++i];
    out += c == 't' ? '\t' : c == 'n' ? '\n' : c == 'r' ? '\r' : c;
  }
  return out;
}

}  // namespace

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) out += "w\t" + escape(t) + "\n";
  for (const auto& t : pos_tags_) out += "p\t" + escape(t) + "\n";
  return out;
}

uint64_t Vocabulary::hash() const { return fnv1a64(serialize()); }

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  int words = 0, tags = 0;
  std::size_t line_no = 0;
  for (const std::string& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (line.size() < 2 || line[1] != '\t' || (line[0] != 'w' && line[0] != 'p')) {
      throw Error("vocabulary line " + std::to_string(line_no) + ": malformed");
    }
    const std::string token = unescape(std::string_view(line).substr(2));
    int& seen = line[0] == 'w' ? words : tags;
    const int expected = line[0] == 'w' ? v.add(token) : v.add_pos(token);
    if (expected != seen) {
      throw Error("vocabulary line " + std::to_string(line_no) +
                  ": duplicate or misplaced entry");
    }
    ++seen;
  }
  if (words < kSpecialCount || tags < 2) {
    throw Error("vocabulary: missing special entries");
  }
  return v;
}

Eigen::VectorXd oov_vector(std::string_view token, int dim, uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a64(token)));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.uniform(-0.25, 0.25);
  return v;
}

Pretrained parse_pretrained(std::string_view text, uint64_t oov_seed) {
  auto lines = split(text, '\n');
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    while (line_no < lines.size()) {
      std::string_view l = trim(lines[line_no++]);
      if (!l.empty()) return l;
    }
    return {};
  };
  auto parse_number = [](std::string_view s, double& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  };

  std::string_view header = next_line();
  auto head = whitespace_tokenize(header);
  double v_count = 0, d_count = 0;
  if (head.size() != 2 || !parse_number(head[0], v_count) ||
      !parse_number(head[1], d_count) || v_count < 0 || d_count < 1) {
    throw Error("embeddings line 1: expected header \"V D\"");
  }
  const int V = static_cast<int>(v_count);
  const int D = static_cast<int>(d_count);

  Pretrained out;
  std::vector<Eigen::VectorXd> rows;
  for (int r = 0; r < V; ++r) {
    std::string_view line = next_line();
    if (line.empty()) {
      throw Error("embeddings: expected " + std::to_string(V) + " rows, got " +
                  std::to_string(r));
    }
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && is_space(line[pos])) ++pos;
      std::size_t end = pos;
      while (end < line.size() && !is_space(line[end])) ++end;
      if (end > pos) fields.push_back(line.substr(pos, end - pos));
      pos = end;
    }
    if (static_cast<int>(fields.size()) != D + 1) {
      throw Error("embeddings line " + std::to_string(line_no) + ": expected " +
                  std::to_string(D) + " numbers, got " +
                  std::to_string(fields.size() - 1));
    }
    Eigen::VectorXd row(D);
    for (int k = 0; k < D; ++k) {
      if (!parse_number(fields[k + 1], row[k]) || !std::isfinite(row[k])) {
        throw Error("embeddings line " + std::to_string(line_no) +
                    ": bad number \"" + std::string(fields[k + 1]) + "\"");
      }
    }
    const int before = out.vocab.size();
    const int index = out.vocab.add(fields[0]);
    if (index != before) {
      throw Error("embeddings line " + std::to_string(line_no) +
                  ": duplicate token \"" + std::string(fields[0]) + "\"");
    }
    rows.push_back(std::move(row));
  }
  out.table.words.resize(out.vocab.size(), D);
  out.table.words.row(kPad).setZero();
  for (int s = 1; s < kSpecialCount; ++s) {
    out.table.words.row(s) = oov_vector(out.vocab.token(s), D, oov_seed);
  }
  for (int r = 0; r < V; ++r) out.table.words.row(kSpecialCount + r) = rows[r];
  out.table.pos.resize(out.vocab.pos_size(), 0);
  out.table.oov_seed = oov_seed;
  return out;
}

Pretrained load_pretrained(const std::filesystem::path& path,
                           uint64_t oov_seed) {
  try {
    return parse_pretrained(read_file(path), oov_seed);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

EmbeddingTable build_embedding_table(const Vocabulary& vocab, int dim,
                                     int pos_dim, uint64_t oov_seed,
                                     const Pretrained* pretrained) {
  if (pretrained != nullptr) {
    if (pretrained->table.dim() != dim) {
      throw Error("embedding dimension " + std::to_string(dim) +
                  " does not match pre-trained dimension " +
                  std::to_string(pretrained->table.dim()));
    }
  }
  if (dim < 1 || pos_dim < 0) throw Error("invalid embedding dimensions");
  EmbeddingTable t;
  t.oov_seed = oov_seed;
  t.words.resize(vocab.size(), dim);
  t.words.row(kPad).setZero();
  for (int i = 1; i < vocab.size(); ++i) {
    const std::string& tok = vocab.token(i);
    std::optional<int> hit;
    if (pretrained != nullptr && i >= kSpecialCount) hit = pretrained->vocab.find(tok);
    if (hit) {
      t.words.row(i) = pretrained->table.words.row(*hit);
    } else {
      t.words.row(i) = oov_vector(tok, dim, oov_seed);
    }
  }
  t.pos.resize(vocab.pos_size(), pos_dim);
  if (pos_dim > 0) {
    t.pos.row(kPad).setZero();
    for (int i = 1; i < vocab.pos_size(); ++i) {
      t.pos.row(i) =
          oov_vector(std::string("pos:") + vocab.pos_tag(i), pos_dim, oov_seed);
    }
  }
  return t;
}

std::vector<std::string> name_channel(std::string_view name, int name_len) {
  if (name.empty()) throw Error("name_channel: empty name");
  if (name_len < 3) throw Error("name_channel: name_len must be >= 3");
  auto chars = utf8_graphemes(name);
  const auto keep = static_cast<std::size_t>(name_len - 2);
  if (chars.size() > keep) chars.resize(keep);
  std::vector<std::string> out;
  out.reserve(chars.size() + 2);
  out.emplace_back(kStartToken);
  for (auto& c : chars) out.push_back(std::move(c));
  out.emplace_back(kEndToken);
  return out;
}

namespace {

constexpr std::string_view kTitleOpen = "«";
constexpr std::string_view kTitleClose = "»";

bool matches_at(const std::vector<Token>& words, std::size_t i,
                const std::vector<std::string>& seq) {
  if (seq.empty() || i + seq.size() > words.size()) return false;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (words[i + k].word != seq[k]) return false;
  }
  return true;
}

}  // namespace

DescriptionWords description_channel(
    std::string_view name, std::string_view description,
    const std::optional<std::vector<Token>>& tokens) {
  DescriptionWords out;
  const std::string title =
      std::string(kTitleOpen) + std::string(name) + std::string(kTitleClose);
  std::vector<Token> words;
  if (tokens) {
    words = *tokens;
  } else {
    std::string text(description);
    if (!name.empty()) {
      for (std::size_t p = text.find(title); p != std::string::npos;
           p = text.find(title, p)) {
        text.replace(p, title.size(), " ");
        out.moved_title = title;
      }
    }
    for (auto& w : whitespace_tokenize(text)) words.push_back({std::move(w), {}});
  }
  if (name.empty()) {
    out.words = std::move(words);
    return out;
  }

  const std::vector<std::string> name_seq = whitespace_tokenize(name);
  std::vector<std::string> title_seq{std::string(kTitleOpen)};
  title_seq.insert(title_seq.end(), name_seq.begin(), name_seq.end());
  title_seq.emplace_back(kTitleClose);

  for (std::size_t i = 0; i < words.size();) {
    if (words[i].word == title) {
      out.moved_title = title;
      i += 1;
    } else if (matches_at(words, i, title_seq)) {
      out.moved_title = title;
      i += title_seq.size();
    } else if (words[i].word == name) {
      i += 1;
    } else if (matches_at(words, i, name_seq)) {
      i += name_seq.size();
    } else {
      out.words.push_back(std::move(words[i]));
      i += 1;
    }
  }
  return out;
}

ChannelInput channelize(const corpus::Entity& entity, const Vocabulary& vocab,
                        const ChannelLimits& limits) {
  if (!entity.description) {
    throw Error("channelize: entity \"" + entity.id + "\" has no description");
  }
  if (limits.desc_len < 1) throw Error("channelize: desc_len must be >= 1");
  DescriptionWords desc =
      description_channel(entity.name, *entity.description, entity.tokens);
  const auto chars =
      name_channel(desc.moved_title ? *desc.moved_title : entity.name,
                   limits.name_len);

  ChannelInput in;
  in.name_ids.assign(limits.name_len, kPad);
  in.valid_name_len = static_cast<int>(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) {
    in.name_ids[i] = vocab.index_or_unk(chars[i]);
  }

  in.desc_ids.assign(limits.desc_len, kPad);
  const auto n = std::min<std::size_t>(desc.words.size(), limits.desc_len);
  in.valid_desc_len = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    in.desc_ids[i] = vocab.index_or_unk(desc.words[i].word);
  }
  const bool tagged =
      entity.tokens && std::any_of(desc.words.begin(), desc.words.end(),
                                   [](const Token& t) { return t.pos.has_value(); });
  if (limits.pos && tagged) {
    std::vector<int> pos(limits.desc_len, kPad);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = desc.words[i].pos ? vocab.pos_index_or_unk(*desc.words[i].pos) : 1;
    }
    in.desc_pos_ids = std::move(pos);
  }
  return in;
}

Vocabulary build_vocabulary(const corpus::EntityCollection& entities,
                            const ChannelLimits& limits) {
  Vocabulary vocab;
  for (const corpus::Entity& e : entities) {
    if (!e.description) continue;
    DescriptionWords desc = description_channel(e.name, *e.description, e.tokens);
    for (const auto& c :
         name_channel(desc.moved_title ? *desc.moved_title : e.name,
                      limits.name_len)) {
      vocab.add(c);
    }
    const auto n = std::min<std::size_t>(desc.words.size(), limits.desc_len);
    for (std::size_t i = 0; i < n; ++i) {
      vocab.add(desc.words[i].word);
      if (limits.pos && desc.words[i].pos) vocab.add_pos(*desc.words[i].pos);
    }
  }
  return vocab;
}

}  // namespace descnet::features
