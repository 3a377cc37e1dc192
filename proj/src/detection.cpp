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

#include "missref/detection.hpp"

#include <algorithm>
#include <cmath>

#include "missref/error.hpp"

namespace missref {

bool is_known_label(std::string_view label) noexcept {
  return label == kAbnormalLabel ||
         std::find(kFindingClasses.begin(), kFindingClasses.end(), label) !=
             kFindingClasses.end();
}

Detection::Detection(BBox b, double c, std::optional<std::string> l)
    : box(b), confidence(c), label(std::move(l)) {
  if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "detection confidence " + std::to_string(c) + " outside [0, 1]");
  }
}

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.box != b.box) return a.box < b.box;
  return a.label < b.label;
}

}  // namespace missref
