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

#include <span>
#include <string>
#include <vector>

#include "missref/geometry.hpp"

namespace missref {

inline constexpr double kDefaultFusionThreshold = 0.3;

struct LabeledBox {
  BBox box;
  std::string label;

  bool operator==(const LabeledBox&) const = default;
};

// One representative box per lesion. `labels` is the sorted multiset of the
// merged readers' class tags; `sources` are the merged input boxes, sorted.
struct FusedAnnotation {
  BBox box;
  int source_count = 1;
  std::vector<std::string> labels;
  std::vector<BBox> sources;

  bool operator==(const FusedAnnotation&) const = default;
};

// Iterative greedy merge to a fixpoint. While some pair of current boxes has
// IoU >= threshold, the pair with the largest IoU is replaced by its hull
// (ties go to the lexicographically smallest pair). The output is sorted by
// box and has pairwise IoU < threshold.
//
// Throws kInvalidThreshold unless 0 < threshold <= 1.
std::vector<FusedAnnotation> fuse(std::span<const LabeledBox> boxes,
                                  double threshold = kDefaultFusionThreshold);

}  // namespace missref
