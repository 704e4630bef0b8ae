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

#ifndef DESCNET_RANDOM_H_
#define DESCNET_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace descnet {

// SplitMix64 finalizer. Used to derive independent seeds.
uint64_t mix64(uint64_t x);

// Derives a child seed from a parent seed and a salt.
uint64_t derive_seed(uint64_t seed, uint64_t salt);
uint64_t derive_seed(uint64_t seed, std::string_view salt);

// Seeded random source. All draws are built on the raw 64-bit engine
// output, independent of the standard library's distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n);

  // Uniform integer in [lo, hi].
  int64_t between(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  // k distinct elements drawn uniformly without replacement, in draw order.
  template <typename T>
  std::vector<T> sample(std::vector<T> items, std::size_t k) {
    if (k > items.size()) k = items.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + below(items.size() - i);
      std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace descnet

#endif  // DESCNET_RANDOM_H_
