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

#include "descnet/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "descnet/random.h"
#include "descnet/text.h"

namespace descnet::corpus {

namespace {

constexpr std::string_view kConsonants = "bdfghjklmnprstvwz";
constexpr std::string_view kVowels = "aeiou";

// Three-syllable pseudo-word, unique per index below 85^3.
std::string word_for(int index) {
  const int base = static_cast<int>(kConsonants.size() * kVowels.size());
  std::string w;
  for (int k = 0; k < 3; ++k) {
    const int s = index % base;
    index /= base;
    w += kConsonants[s / kVowels.size()];
    w += kVowels[s % kVowels.size()];
  }
  return w;
}

std::string class_id(int c) {
  std::string id = std::to_string(c);
  if (id.size() < 2) id.insert(0, 2 - id.size(), '0');
  return "class" + id;
}

std::string cue_for(int c) {
  std::string cue;
  cue += static_cast<char>('A' + c % 26);
  cue += static_cast<char>('A' + (c * 7 + 3) % 26);
  return cue;
}

void validate(const SynthSpec& s) {
  if (s.class_count < 1) throw Error("synthetic: class_count must be >= 1");
  if (!s.class_sizes.empty() &&
      static_cast<int>(s.class_sizes.size()) != s.class_count) {
    throw Error("synthetic: class_sizes must list class_count entries");
  }
  for (int n : s.class_sizes) {
    if (n < 1) throw Error("synthetic: class sizes must be >= 1");
  }
  if (s.class_sizes.empty() &&
      (s.min_class_size < 1 || s.max_class_size < s.min_class_size)) {
    throw Error("synthetic: invalid class size bounds");
  }
  if (!(s.noise_rate >= 0.0 && s.noise_rate < 1.0)) {
    throw Error("synthetic: noise_rate must lie in [0, 1)");
  }
  if (s.noise_rate > 0.0 && s.class_count < 2) {
    throw Error("synthetic: label noise needs at least two classes");
  }
  if (s.vocab_per_class < 1 || s.shared_vocab < 1 || s.desc_len_min < 1 ||
      s.desc_len_max < s.desc_len_min || s.groups < 1) {
    throw Error("synthetic: invalid vocabulary or length settings");
  }
}

}  // namespace

std::vector<int> log_spaced_sizes(int class_count, int lo, int hi) {
  std::vector<int> sizes(class_count);
  for (int i = 0; i < class_count; ++i) {
    const double t = class_count == 1 ? 0.0 : double(i) / (class_count - 1);
    sizes[i] = static_cast<int>(
        std::floor(lo * std::pow(double(hi) / lo, t) + 0.5));
  }
  return sizes;
}

SynthCorpus gen_synthetic(const SynthSpec& spec) {
  validate(spec);
  const int C = spec.class_count;
  const std::vector<int> sizes =
      spec.class_sizes.empty()
          ? log_spaced_sizes(C, spec.min_class_size, spec.max_class_size)
          : spec.class_sizes;

  std::vector<ConceptNode> nodes;
  nodes.push_back({"root", "root", -1, false, false});
  const int groups = std::min(spec.groups, C);
  for (int g = 0; g < groups; ++g) {
    nodes.push_back({"group" + std::to_string(g), "", 0, false, false});
  }
  for (int c = 0; c < C; ++c) {
    nodes.push_back({class_id(c), "", 1 + c % groups, true, false});
  }
  SynthCorpus out;
  out.taxonomy = Taxonomy::from_nodes(std::move(nodes));

  Rng rng(derive_seed(spec.seed, "synthetic"));
  const int shared_offset = C * spec.vocab_per_class;
  auto shared_word = [&](int j) { return word_for(shared_offset + j); };
  auto class_word = [&](int c, int j) {
    return word_for(c * spec.vocab_per_class + j);
  };
  auto shared_tag = [](int j) {
    static const char* kTags[] = {"VV", "AD", "NN", "P", "JJ"};
    return std::string(kTags[j % 5]);
  };

  struct Draft {
    int true_class;
    Entity entity;
  };
  std::vector<Draft> drafts;
  for (int c = 0; c < C; ++c) {
    const int partner = (c + 1) % C;
    for (int k = 0; k < sizes[c]; ++k) {
      Entity e;
      std::string name;
      const int syllables = static_cast<int>(rng.between(2, 3));
      for (int s = 0; s < syllables; ++s) {
        name += kConsonants[rng.below(kConsonants.size())];
        name += kVowels[rng.below(kVowels.size())];
      }
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
      if (rng.bernoulli(spec.name_cue_rate)) name += "-" + cue_for(c);
      e.name = name;

      const double partner_share =
          C > 1 && rng.bernoulli(spec.blend_rate)
              ? rng.uniform(spec.blend_min, spec.blend_max)
              : 0.0;
      const int len =
          static_cast<int>(rng.between(spec.desc_len_min, spec.desc_len_max));
      std::vector<Token> tokens{{name, "NR"}};
      for (int w = 0; w < len; ++w) {
        if (rng.bernoulli(spec.overlap_rate)) {
          const int j = static_cast<int>(rng.below(spec.shared_vocab));
          tokens.push_back({shared_word(j), shared_tag(j)});
        } else {
          const int src = rng.bernoulli(partner_share) ? partner : c;
          const int j = static_cast<int>(rng.below(spec.vocab_per_class));
          tokens.push_back({class_word(src, j), "NN"});
        }
      }
      tokens.push_back({".", "PU"});

      std::string filler;
      const int filler_len = static_cast<int>(rng.between(3, 6));
      for (int w = 0; w < filler_len; ++w) {
        filler += shared_word(static_cast<int>(rng.below(spec.shared_vocab)));
        filler += ' ';
      }
      filler += '.';

      if (rng.bernoulli(spec.undescribed_rate)) {
        // Index-page style opening: no name prefix, nominal first token.
        tokens = {{"index", "NN"}, {"page", "NN"}, {"for", "P"},
                  {name, "NR"},    {".", "PU"}};
      }
      std::string first;
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) first += ' ';
        first += tokens[t].word;
      }
      e.raw_text = first + " " + filler;
      if (spec.emit_tokens) e.tokens = std::move(tokens);
      e.audit_label = class_id(c);
      drafts.push_back({c, std::move(e)});
    }
  }

  // Unknown entities: an exact per-class fraction.
  std::vector<bool> known(drafts.size(), true);
  {
    std::size_t begin = 0;
    for (int c = 0; c < C; ++c) {
      const auto n_unknown = static_cast<std::size_t>(
          std::floor(spec.unknown_fraction * sizes[c] + 0.5));
      std::vector<std::size_t> members(sizes[c]);
      std::iota(members.begin(), members.end(), begin);
      for (std::size_t i : rng.sample(members, n_unknown)) known[i] = false;
      begin += sizes[c];
    }
  }
  std::vector<std::size_t> known_ids;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (known[i]) known_ids.push_back(i);
  }

  std::vector<std::size_t> noisy;
  if (spec.exact_noise_count) {
    const auto n_noise = static_cast<std::size_t>(
        std::floor(spec.noise_rate * known_ids.size() + 0.5));
    noisy = rng.sample(known_ids, n_noise);
  } else {
    for (std::size_t i : known_ids) {
      if (rng.bernoulli(spec.noise_rate)) noisy.push_back(i);
    }
  }
  std::vector<int> wrong_label(drafts.size(), -1);
  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  for (std::size_t i : noisy) {
    const int t = drafts[i].true_class;
    int w;
    if (spec.noise_target == NoiseTarget::kUniform) {
      w = static_cast<int>(rng.below(C - 1));
      if (w >= t) ++w;
    } else {
      double u = rng.uniform() * (total - sizes[t]);
      w = -1;
      for (int c = 0; c < C; ++c) {
        if (c == t) continue;
        w = c;
        if (u < sizes[c]) break;
        u -= sizes[c];
      }
    }
    wrong_label[i] = w;
  }
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (!known[i]) continue;
    const int label = wrong_label[i] >= 0 ? wrong_label[i] : drafts[i].true_class;
    drafts[i].entity.label = class_id(label);
  }

  std::vector<std::size_t> order(drafts.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const int width = std::max<int>(6, std::to_string(drafts.size()).size());
  out.entities.reserve(drafts.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    Entity e = std::move(drafts[order[k]].entity);
    std::string num = std::to_string(k);
    e.id = "e" + std::string(width - num.size(), '0') + num;
    out.entities.push_back(std::move(e));
  }
  return out;
}

}  // namespace descnet::corpus
