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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "missref/detection.hpp"

namespace missref {

enum class GateVerdict { kNormal, kAbnormal, kUnavailable };

std::string_view gate_verdict_name(GateVerdict v);
std::optional<GateVerdict> parse_gate_verdict(std::string_view name);

// Detector boxes with no overlap against any reader box, for one image.
struct ReferralSet {
  std::string image_id;
  std::vector<Detection> referrals;  // ranks_before() order
  std::vector<BBox> annotations_used;
  std::optional<GateVerdict> gate;   // verdict the pipeline saw, if any

  bool operator==(const ReferralSet&) const = default;
};

// Keeps the detections whose IoU with every annotation is exactly 0. With no
// annotations every detection is a referral. The input must already be free
// of overlapping pairs; otherwise throws kUnsuppressedInput.
ReferralSet compute_referrals(std::string image_id, std::span<const Detection> detections,
                              std::span<const BBox> annotations);

inline constexpr double kDefaultConfidenceFloor = 0.25;

struct PipelineConfig {
  double confidence_floor = kDefaultConfidenceFloor;
};

// Gate -> confidence floor -> zero-overlap suppression -> compute_referrals.
// A `normal` verdict short-circuits to an empty set; `abnormal` and
// `unavailable` behave like no gate at all.
ReferralSet referral_pipeline(std::string image_id, std::span<const Detection> raw_detections,
                              std::span<const BBox> annotations,
                              std::optional<GateVerdict> gate = std::nullopt,
                              const PipelineConfig& config = {});

}  // namespace missref
