// Copyright 2026 The qsynth Authors. All rights reserved.
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

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "qsynth/common/hash.h"

namespace qsynth {

// Derives an independent stream seed from a root seed and a stream name.
// Every stage that needs randomness asks for its own named stream, so adding
// draws in one stage never perturbs another.
constexpr uint64_t DeriveSeed(uint64_t seed, std::string_view stream,
                              uint64_t index = 0) {
  return Mix64(Mix64(seed ^ Fnv1a64(stream)) + index);
}

// Thin wrapper over mt19937_64. The engine's output sequence is fixed by the
// standard; the conversions below are our own so results do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  Rng(uint64_t seed, std::string_view stream, uint64_t index = 0)
      : engine_(DeriveSeed(seed, stream, index)) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, n). n must be positive.
  uint64_t Below(uint64_t n) {
    // Rejection sampling keeps the result exactly uniform.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller.
  double Normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace qsynth
