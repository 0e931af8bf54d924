// Copyright 2026 The Undersense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UNDERSENSE_RNG_H_
#define UNDERSENSE_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace undersense {

// FNV-1a over the bytes of `text`.
uint64_t Fnv1a64(std::string_view text);

// SplitMix64 finalizer.
uint64_t Mix64(uint64_t x);

// Folds `parts` into `base`. Used to give every (sample, depth, beam item)
// its own stream without sharing generator state between workers.
uint64_t DeriveSeed(uint64_t base, std::initializer_list<uint64_t> parts);

// Seeded generator whose output sequence is identical on every platform.
// std::mt19937_64 is fully specified by the standard; the distributions in
// <random> are not, so bounded draws and shuffles are implemented here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  uint64_t UniformIndex(uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformUnit();

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = UniformIndex(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace undersense

#endif  // UNDERSENSE_RNG_H_
