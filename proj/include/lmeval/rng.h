// Copyright 2026 The lmeval Authors.
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

// Portable seeded randomness.
//
// Every shuffle, sample and bootstrap draw in the project goes through
// SplitMix64 and the bounded-integer routine below, so a (seed, input) pair
// produces the same permutation on every platform and standard library.
// <random> distributions are deliberately not used: their output is
// implementation-defined.
//
// SplitMix64 (Steele, Lea, Flood 2014):
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// Bounded draws use rejection sampling on the top of the 64-bit range, so
// Below(n) is exactly uniform on [0, n).

#ifndef LMEVAL_RNG_H_
#define LMEVAL_RNG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace lmeval {

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t Next();

  // Uniform integer in [0, bound). bound must be positive.
  uint64_t Below(uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double Unit();

 private:
  uint64_t state_;
};

// Independent sub-seed for stream `stream` of a parent seed. Used to give each
// recipe component, bootstrap resample, or worker its own generator without
// the results depending on how work is scheduled.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

// In-place Fisher-Yates: for i = n-1 down to 1, swap(i, Below(i + 1)).
template <typename T>
void Shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.Below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Seeded permutation of 0..n-1.
std::vector<std::size_t> Permutation(std::size_t n, uint64_t seed);

// First k entries of a seeded partial Fisher-Yates over 0..n-1: a uniform
// sample of k distinct indices, in draw order. Requires k <= n.
std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k,
                                                  uint64_t seed);

}  // namespace lmeval

#endif  // LMEVAL_RNG_H_
