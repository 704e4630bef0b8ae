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

// Deterministic synthetic corpora with tunable class separability, label
// noise and unlabeled ("unknown") entities.

#ifndef DESCNET_SYNTH_H_
#define DESCNET_SYNTH_H_

#include <cstdint>
#include <vector>

#include "descnet/corpus.h"

namespace descnet::corpus {

enum class NoiseTarget {
  kUniform,  // wrong label uniform over the other classes
  kPrior,    // wrong label drawn proportionally to the other classes' sizes
};

struct SynthSpec {
  int class_count = 10;
  // Entities per true class. When empty, log-spaced between the bounds.
  std::vector<int> class_sizes;
  int min_class_size = 100;
  int max_class_size = 10000;
  // Parent concepts of the generated taxonomy.
  int groups = 2;

  int vocab_per_class = 30;
  int shared_vocab = 300;
  // Per-word chance of drawing from the shared vocabulary.
  double overlap_rate = 0.5;
  // Fraction of entities whose class words partly come from a partner class,
  // with a partner share drawn uniformly from [blend_min, blend_max].
  double blend_rate = 0.0;
  double blend_min = 0.2;
  double blend_max = 0.6;
  // Chance that a name carries its class's suffix cue.
  double name_cue_rate = 0.5;
  int desc_len_min = 6;
  int desc_len_max = 14;

  double noise_rate = 0.0;
  bool exact_noise_count = true;
  NoiseTarget noise_target = NoiseTarget::kPrior;
  double unknown_fraction = 0.0;
  // Entities whose first sentence is not a description.
  double undescribed_rate = 0.0;
  bool emit_tokens = true;
  uint64_t seed = 1;
};

struct SynthCorpus {
  Taxonomy taxonomy;
  EntityCollection entities;
};

// round(lo * (hi/lo)^(i/(C-1))) for i in [0, C).
std::vector<int> log_spaced_sizes(int class_count, int lo, int hi);

// Every entity carries audit_label (its true class). Known entities carry a
// label, which differs from audit_label for the injected-noise subset.
SynthCorpus gen_synthetic(const SynthSpec& spec);

}  // namespace descnet::corpus

#endif  // DESCNET_SYNTH_H_
