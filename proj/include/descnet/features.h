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

// Input channels of the classifier: the character-level name and the
// word-level description, mapped through one shared embedding table.

#ifndef DESCNET_FEATURES_H_
#define DESCNET_FEATURES_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "descnet/corpus.h"

namespace descnet::features {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kPad = 0;
inline constexpr int kStart = 1;
inline constexpr int kEnd = 2;
inline constexpr int kUnk = 3;
inline constexpr int kSpecialCount = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kEndToken = "<end>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Words and single characters share one index space. POS tags have their own
// map, also with <pad> = 0 and <unk> = 1.
class Vocabulary {
 public:
  Vocabulary();

  int add(std::string_view token);
  std::optional<int> find(std::string_view token) const;
  int index_or_unk(std::string_view token) const;
  const std::string& token(int index) const { return tokens_.at(index); }
  int size() const { return static_cast<int>(tokens_.size()); }

  int add_pos(std::string_view tag);
  int pos_index_or_unk(std::string_view tag) const;
  const std::string& pos_tag(int index) const { return pos_tags_.at(index); }
  int pos_size() const { return static_cast<int>(pos_tags_.size()); }

  uint64_t hash() const;

  // One entry per line: "w\t<token>" or "p\t<tag>", in index order.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> pos_tags_;
  std::unordered_map<std::string, int> pos_index_;
};

struct EmbeddingTable {
  RowMatrix words;  // V x D; row kPad is zero
  RowMatrix pos;    // T x D_pos; zero columns when POS is disabled
  bool trainable = true;
  uint64_t oov_seed = 0;

  int dim() const { return static_cast<int>(words.cols()); }
  int pos_dim() const { return static_cast<int>(pos.cols()); }
};

// Deterministic uniform(-0.25, 0.25) vector for a token without a
// pre-trained row.
Eigen::VectorXd oov_vector(std::string_view token, int dim, uint64_t seed);

struct Pretrained {
  Vocabulary vocab;
  EmbeddingTable table;
};

// Text format: header "V D", then V lines "token x_1 ... x_D".
Pretrained load_pretrained(const std::filesystem::path& path,
                           uint64_t oov_seed = 0);
Pretrained parse_pretrained(std::string_view text, uint64_t oov_seed = 0);

// Rows for every vocabulary token: the pre-trained vector when available,
// otherwise oov_vector. POS rows are random and learned from scratch.
EmbeddingTable build_embedding_table(const Vocabulary& vocab, int dim,
                                     int pos_dim, uint64_t oov_seed,
                                     const Pretrained* pretrained = nullptr);

struct ChannelLimits {
  int name_len = 16;
  int desc_len = 64;
  bool pos = true;
};

// [<start>, c_1, ..., c_k, <end>], keeping at most name_len - 2 characters.
std::vector<std::string> name_channel(std::string_view name, int name_len);

struct DescriptionWords {
  std::vector<corpus::Token> words;
  std::optional<std::string> moved_title;
};

// Removes every occurrence of the name from the description. A «name» title
// span is removed as a whole and returned for the name channel. `tokens`, when
// given, are the pre-tokenized description; otherwise whitespace_tokenize runs.
DescriptionWords description_channel(
    std::string_view name, std::string_view description,
    const std::optional<std::vector<corpus::Token>>& tokens = std::nullopt);

struct ChannelInput {
  std::vector<int> name_ids;  // padded to name_len
  std::vector<int> desc_ids;  // padded to desc_len
  std::optional<std::vector<int>> desc_pos_ids;
  int valid_name_len = 0;
  int valid_desc_len = 0;
};

// Requires entity.description.
ChannelInput channelize(const corpus::Entity& entity, const Vocabulary& vocab,
                        const ChannelLimits& limits);

// Every name character, description word and POS tag of the described
// entities, in first-seen order.
Vocabulary build_vocabulary(const corpus::EntityCollection& entities,
                            const ChannelLimits& limits);

}  // namespace descnet::features

#endif  // DESCNET_FEATURES_H_
