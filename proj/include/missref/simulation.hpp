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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "missref/fusion.hpp"
#include "missref/ingestion.hpp"

namespace missref {

// A case after multi-reader fusion. In an ErrorDataset, `annotations` is
// what the simulated reader presents (the fused set minus any removed box).
struct FusedCase {
  std::string image_id;
  ImageDims original;
  std::vector<FusedAnnotation> annotations;
  bool abnormal = false;  // true when the case had findings before removal

  bool operator==(const FusedCase&) const = default;
};

std::vector<FusedCase> fuse_cases(std::span<const CaseRecord> cases,
                                  double threshold = kDefaultFusionThreshold);

// Ground truth for a simulated perceptual miss.
struct MissRecord {
  std::string image_id;
  FusedAnnotation removed;
  std::uint64_t seed = 0;
  std::size_t draw_index = 0;  // rank of the case in the seeded selection

  bool operator==(const MissRecord&) const = default;
};

inline constexpr double kDefaultMissFraction = 0.30;

struct SimulationConfig {
  double fraction = kDefaultMissFraction;
  double fusion_threshold = kDefaultFusionThreshold;
  std::uint64_t seed = 0;
  // Abnormal cases with fewer fused boxes than this are never altered.
  std::size_t min_boxes_for_removal = 1;

  bool operator==(const SimulationConfig&) const = default;
};

struct ErrorDataset {
  SimulationConfig config;
  std::vector<FusedCase> cases;    // sorted by image_id
  std::vector<MissRecord> misses;  // sorted by image_id

  bool operator==(const ErrorDataset&) const = default;
};

// Fuses every case and delegates to simulate_fused().
ErrorDataset simulate(std::span<const CaseRecord> cases, const SimulationConfig& config);

// Picks exactly round(fraction * eligible) abnormal cases with a seeded,
// id-keyed permutation and removes one uniformly chosen fused box from each.
// Throws kInvalidArgument for a fraction outside (0, 1) and
// kNoAbnormalCases when nothing is abnormal.
ErrorDataset simulate_fused(std::span<const FusedCase> cases, const SimulationConfig& config);

// Full fused ground truth per image: presented boxes plus removed ones.
std::map<std::string, std::vector<BBox>, std::less<>> ground_truth_boxes(const ErrorDataset& ds);

}  // namespace missref
