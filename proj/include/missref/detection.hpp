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

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "missref/geometry.hpp"

namespace missref {

// The fourteen thoracic finding classes of the VinDr-CXR annotation tables.
inline constexpr std::array<std::string_view, 14> kFindingClasses = {
    "Aortic enlargement", "Atelectasis",        "Calcification",
    "Cardiomegaly",       "Consolidation",      "ILD",
    "Infiltration",       "Lung Opacity",       "Nodule/Mass",
    "Other lesion",       "Pleural effusion",   "Pleural thickening",
    "Pneumothorax",       "Pulmonary fibrosis",
};

// Class-agnostic tag used by single-class detectors.
inline constexpr std::string_view kAbnormalLabel = "abnormal";

// Row label for a reader that marked an image as normal.
inline constexpr std::string_view kNoFindingLabel = "No finding";

bool is_known_label(std::string_view label) noexcept;

// A detector box with its confidence. Throws kInvalidArgument when the
// confidence is outside [0, 1] or not finite.
struct Detection {
  Detection(BBox box, double confidence, std::optional<std::string> label = std::nullopt);

  BBox box;
  double confidence;
  std::optional<std::string> label;

  bool operator==(const Detection&) const = default;
};

// Strict weak order: confidence descending, then box coordinates ascending,
// then label. Used wherever detections need a reproducible ranking.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

}  // namespace missref
