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

#include "missref/suppression.hpp"

#include <algorithm>

namespace missref {

std::vector<Detection> suppress_zero_overlap(std::span<const Detection> detections) {
  std::vector<Detection> ranked(detections.begin(), detections.end());
  std::stable_sort(ranked.begin(), ranked.end(), ranks_before);

  std::vector<Detection> kept;
  for (auto& d : ranked) {
    const bool hit = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return overlaps(k.box, d.box);
    });
    if (!hit) kept.push_back(std::move(d));
  }
  return kept;
}

bool is_zero_overlap(std::span<const Detection> detections) noexcept {
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = i + 1; j < detections.size(); ++j) {
      if (overlaps(detections[i].box, detections[j].box)) return false;
    }
  }
  return true;
}

}  // namespace missref
