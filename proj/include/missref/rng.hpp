/* Copyright 2026 The missref Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <string_view>

namespace missref {

// Deterministic, platform-independent generator (SplitMix64). Streams are
// derived from a run seed plus a string key, so a draw keyed by an image id
// does not depend on how many other images exist or on iteration order.
//
// The output sequence of a given (seed, key) is frozen; any change to the
// algorithm must bump kRngName.
class DeterministicRng {
 public:
  static constexpr std::string_view kRngName = "splitmix64-v1";

  explicit DeterministicRng(std::uint64_t state) noexcept : state_(state) {}

  static DeterministicRng substream(std::uint64_t seed, std::string_view key) noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform integer in [0, n). n must be > 0. Unbiased (rejection sampling).
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept;

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  // Standard normal variate (Box-Muller, one value per call).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

// 64-bit FNV-1a; stable across platforms, used for stream keys.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace missref
