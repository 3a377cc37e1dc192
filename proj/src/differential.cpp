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

#include "missref/differential.hpp"

#include <algorithm>

#include "missref/error.hpp"
#include "missref/suppression.hpp"

namespace missref {

std::string_view gate_verdict_name(GateVerdict v) {
  switch (v) {
    case GateVerdict::kNormal: return "normal";
    case GateVerdict::kAbnormal: return "abnormal";
    case GateVerdict::kUnavailable: return "unavailable";
  }
  return "unavailable";
}

std::optional<GateVerdict> parse_gate_verdict(std::string_view name) {
  if (name == "normal") return GateVerdict::kNormal;
  if (name == "abnormal") return GateVerdict::kAbnormal;
  if (name == "unavailable") return GateVerdict::kUnavailable;
  return std::nullopt;
}

ReferralSet compute_referrals(std::string image_id, std::span<const Detection> detections,
                              std::span<const BBox> annotations) {
  if (!is_zero_overlap(detections)) {
    throw Error(ErrorCode::kUnsuppressedInput,
                "detections for '" + image_id + "' contain overlapping boxes; suppress first");
  }
  ReferralSet out;
  out.image_id = std::move(image_id);
  out.annotations_used.assign(annotations.begin(), annotations.end());
  for (const auto& d : detections) {
    const bool covered = std::any_of(annotations.begin(), annotations.end(),
                                     [&](const BBox& r) { return overlaps(d.box, r); });
    if (!covered) out.referrals.push_back(d);
  }
  std::stable_sort(out.referrals.begin(), out.referrals.end(), ranks_before);
  return out;
}

ReferralSet referral_pipeline(std::string image_id, std::span<const Detection> raw_detections,
                              std::span<const BBox> annotations, std::optional<GateVerdict> gate,
                              const PipelineConfig& config) {
  if (gate == GateVerdict::kNormal) {
    ReferralSet out;
    out.image_id = std::move(image_id);
    out.annotations_used.assign(annotations.begin(), annotations.end());
    out.gate = gate;
    return out;
  }
  std::vector<Detection> confident;
  confident.reserve(raw_detections.size());
  std::copy_if(raw_detections.begin(), raw_detections.end(), std::back_inserter(confident),
               [&](const Detection& d) { return d.confidence >= config.confidence_floor; });
  const auto kept = suppress_zero_overlap(confident);
  auto out = compute_referrals(std::move(image_id), kept, annotations);
  out.gate = gate;
  return out;
}

}  // namespace missref
