// Copyright 2026 The dqsel Authors.
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

#ifndef DQSEL_RNG_H_
#define DQSEL_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dqsel {

std::uint64_t SplitMix64(std::uint64_t x);

// Seed for an independent stream, e.g. one ensemble member or one outer
// iteration. Depends only on (seed, stream) so scheduling cannot change it.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

// Deterministic generator with portable bounded draws. std distributions are
// implementation-defined, so nothing here uses them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  // Uniform in [0, bound). bound must be > 0.
  std::size_t UniformIndex(std::size_t bound);

  // Uniform in [0, 1).
  double UniformReal();

  // Standard normal via Box-Muller.
  double Normal();

  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = UniformIndex(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  // k distinct indices from [0, n) by partial Fisher-Yates; the result is in
  // draw order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n,
                                                    std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace dqsel

#endif  // DQSEL_RNG_H_
