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

#include <string>
#include <vector>

#include "descnet/corpus.h"
#include "descnet/features.h"
#include "descnet/text.h"
#include "doctest.h"

namespace descnet::features {
namespace {

using corpus::Entity;
using corpus::Token;

std::vector<std::string> words_of(const DescriptionWords& d) {
  std::vector<std::string> out;
  for (const auto& t : d.words) out.push_back(t.word);
  return out;
}

Entity entity(std::string name, std::string description) {
  Entity e;
  e.id = "e";
  e.name = std::move(name);
  e.raw_text = description;
  e.description = std::move(description);
  return e;
}

TEST_CASE("vocabulary specials and lookups") {
  Vocabulary v;
  CHECK(v.size() == kSpecialCount);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.token(kStart) == "<start>");
  CHECK(v.token(kEnd) == "<end>");
  CHECK(v.index_or_unk("zebra") == kUnk);
  const int z = v.add("zebra");
  CHECK(z == kSpecialCount);
  CHECK(v.add("zebra") == z);
  CHECK(*v.find("zebra") == z);
  CHECK(v.pos_index_or_unk("NN") == 1);
  const int nn = v.add_pos("NN");
  CHECK(v.pos_index_or_unk("NN") == nn);

  const Vocabulary back = Vocabulary::parse(v.serialize());
  CHECK(back.size() == v.size());
  CHECK(back.hash() == v.hash());
  CHECK(*back.find("zebra") == z);
  v.add("tab\there");
  const Vocabulary escaped = Vocabulary::parse(v.serialize());
  CHECK(escaped.find("tab\there").has_value());
  CHECK(escaped.hash() != back.hash());
}

TEST_CASE("load_pretrained parses the header and rows") {
  const Pretrained p = parse_pretrained("3 4\na 1 2 3 4\nb 0 0 0 1\nc -1 .5 2e-1 0\n");
  CHECK(p.table.dim() == 4);
  CHECK(p.vocab.size() == kSpecialCount + 3);
  const int a = *p.vocab.find("a");
  CHECK(p.table.words(a, 3) == 4.0);
  CHECK(p.table.words(*p.vocab.find("c"), 2) == doctest::Approx(0.2));
  CHECK(p.table.words.row(kPad).isZero());
}

TEST_CASE("load_pretrained rejects bad rows") {
  try {
    parse_pretrained("3 4\na 1 2 3 4\nb 1 2 3\nc 1 2 3 4\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_pretrained("2 2\na 1 2\n"), Error);
  CHECK_THROWS_AS(parse_pretrained("1 2\na 1 x\n"), Error);
  CHECK_THROWS_AS(parse_pretrained("2 2\na 1 2\na 3 4\n"), Error);
  CHECK_THROWS_AS(parse_pretrained("garbage\n"), Error);
}

TEST_CASE("oov vectors are deterministic per token and seed") {
  const Eigen::VectorXd a = oov_vector("unseen", 8, 5);
  CHECK(a == oov_vector("unseen", 8, 5));
  CHECK(a != oov_vector("unseen", 8, 6));
  CHECK(a != oov_vector("other", 8, 5));
  CHECK(a.maxCoeff() < 0.25);
  CHECK(a.minCoeff() >= -0.25);
}

TEST_CASE("embedding table combines pretrained rows and oov rows") {
  const Pretrained p = parse_pretrained("1 3\nriver 1 2 3\n");
  Vocabulary v;
  const int river = v.add("river");
  const int lake = v.add("lake");
  v.add_pos("NN");
  const EmbeddingTable t = build_embedding_table(v, 3, 2, 9, &p);
  CHECK(t.words.rows() == v.size());
  CHECK(t.words(river, 1) == 2.0);
  CHECK(t.words.row(lake).transpose() == oov_vector("lake", 3, 9));
  CHECK(t.words.row(kPad).isZero());
  CHECK(t.pos.rows() == v.pos_size());
  CHECK(t.pos_dim() == 2);
  CHECK(t.pos.row(0).isZero());
  CHECK_THROWS_AS(build_embedding_table(v, 4, 2, 9, &p), Error);
  CHECK(build_embedding_table(v, 3, 0, 9).pos_dim() == 0);
}

TEST_CASE("name channel") {
  CHECK(name_channel("Google", 16) ==
        std::vector<std::string>{"<start>", "G", "o", "o", "g", "l", "e", "<end>"});
  CHECK(name_channel("X", 16) == std::vector<std::string>{"<start>", "X", "<end>"});
  const auto long_name = name_channel(std::string(100, 'a'), 16);
  CHECK(long_name.size() == 16);
  CHECK(long_name.back() == "<end>");
  CHECK(name_channel("百度", 16) == std::vector<std::string>{"<start>", "百", "度", "<end>"});
  // A combining accent stays with its base character.
  CHECK(name_channel("e\xCC\x81x", 16).size() == 4);
  CHECK_THROWS_AS(name_channel("", 16), Error);
}

TEST_CASE("description channel removes the name") {
  const auto d = description_channel("Baidu", "Baidu is a company");
  CHECK(words_of(d) == std::vector<std::string>{"is", "a", "company"});
  CHECK_FALSE(d.moved_title.has_value());

  const auto same = description_channel("Nile", "The river is long");
  CHECK(words_of(same) == std::vector<std::string>{"The", "river", "is", "long"});

  const auto multi = description_channel("New York", "New York is in New York State");
  CHECK(words_of(multi) == std::vector<std::string>{"is", "in", "State"});

  const std::vector<Token> tokens = {{"Baidu", "NR"}, {"is", "VC"}, {"big", "JJ"}};
  const auto tagged = description_channel("Baidu", "Baidu is big", tokens);
  REQUIRE(tagged.words.size() == 2);
  CHECK(tagged.words[0] == Token{"is", "VC"});
}

TEST_CASE("description channel moves a title-marked name") {
  const auto d = description_channel("AAA", "«AAA» is a 2001 film");
  CHECK(words_of(d) == std::vector<std::string>{"is", "a", "2001", "film"});
  REQUIRE(d.moved_title.has_value());
  CHECK(*d.moved_title == "«AAA»");

  const std::vector<Token> tokens = {{"«", "PU"}, {"AAA", "NR"}, {"»", "PU"}, {"is", "VC"}};
  const auto t = description_channel("AAA", "«AAA» is", tokens);
  CHECK(words_of(t) == std::vector<std::string>{"is"});
  CHECK(*t.moved_title == "«AAA»");
}

TEST_CASE("channelize pads and records valid lengths") {
  Vocabulary v;
  for (const char* w : {"is", "a", "company"}) v.add(w);
  for (const char* c : {"<start>", "B", "a", "i", "d", "u", "<end>"}) v.add(c);
  ChannelLimits limits;
  limits.name_len = 10;
  limits.desc_len = 6;
  const ChannelInput in = channelize(entity("Baidu", "Baidu is a company."), v, limits);
  CHECK(in.name_ids.size() == 10);
  CHECK(in.desc_ids.size() == 6);
  CHECK(in.valid_name_len == 7);
  CHECK(in.valid_desc_len == 4);  // is a company .
  CHECK(in.desc_ids[0] == *v.find("is"));
  CHECK(in.desc_ids[3] == kUnk);
  for (std::size_t i = in.valid_desc_len; i < in.desc_ids.size(); ++i) CHECK(in.desc_ids[i] == kPad);
  for (std::size_t i = in.valid_name_len; i < in.name_ids.size(); ++i) CHECK(in.name_ids[i] == kPad);
  CHECK_FALSE(in.desc_pos_ids.has_value());

  const ChannelInput empty = channelize(entity("Baidu", "Baidu"), v, limits);
  CHECK(empty.valid_desc_len == 0);
  CHECK(empty.desc_ids == std::vector<int>(6, kPad));

  Entity no_desc = entity("Baidu", "x");
  no_desc.description.reset();
  CHECK_THROWS_AS(channelize(no_desc, v, limits), Error);
}

TEST_CASE("channelize attaches POS ids only when enabled") {
  Entity e = entity("Nile", "Nile is long");
  e.tokens = std::vector<Token>{{"Nile", "NR"}, {"is", "VC"}, {"long", "JJ"}};
  ChannelLimits limits;
  const Vocabulary v = build_vocabulary({e}, limits);
  const ChannelInput in = channelize(e, v, limits);
  REQUIRE(in.desc_pos_ids.has_value());
  CHECK((*in.desc_pos_ids)[0] == v.pos_index_or_unk("VC"));
  CHECK((*in.desc_pos_ids)[2] == kPad);
  limits.pos = false;
  CHECK_FALSE(channelize(e, v, limits).desc_pos_ids.has_value());
}

TEST_CASE("characters and words share one index space") {
  Entity e = entity("X", "X Y marks X");
  const Vocabulary v = build_vocabulary({e}, ChannelLimits{});
  const ChannelInput in = channelize(e, v, ChannelLimits{});
  // "X" as a name character and "Y" as a description word are single tokens
  // of the same table.
  CHECK(in.name_ids[1] == *v.find("X"));
  CHECK(in.desc_ids[0] == *v.find("Y"));
  Entity f = entity("Y", "Y is X");
  const ChannelInput fin = channelize(f, v, ChannelLimits{});
  CHECK(fin.name_ids[1] == in.desc_ids[0]);
}

}  // namespace
}  // namespace descnet::features
