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

#include "missref/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "missref/error.hpp"
#include "missref/rng.hpp"

namespace missref {
namespace {

bool annotation_less(const FusedAnnotation& a, const FusedAnnotation& b) {
  return std::tie(a.box, a.labels, a.sources) < std::tie(b.box, b.labels, b.sources);
}

}  // namespace

std::vector<FusedCase> fuse_cases(std::span<const CaseRecord> cases, double threshold) {
  std::vector<FusedCase> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    std::vector<LabeledBox> boxes;
    boxes.reserve(c.annotations.size());
    for (const auto& a : c.annotations) boxes.push_back({a.box, a.label});
    out.push_back({c.image_id, c.original, fuse(boxes, threshold), !c.is_normal()});
  }
  std::sort(out.begin(), out.end(),
            [](const FusedCase& a, const FusedCase& b) { return a.image_id < b.image_id; });
  return out;
}

ErrorDataset simulate(std::span<const CaseRecord> cases, const SimulationConfig& config) {
  const auto fused = fuse_cases(cases, config.fusion_threshold);
  return simulate_fused(fused, config);
}

ErrorDataset simulate_fused(std::span<const FusedCase> cases, const SimulationConfig& config) {
  if (!std::isfinite(config.fraction) || config.fraction <= 0.0 || config.fraction >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "removal fraction must lie in (0, 1), got " + std::to_string(config.fraction));
  }

  ErrorDataset ds;
  ds.config = config;
  ds.cases.assign(cases.begin(), cases.end());
  std::sort(ds.cases.begin(), ds.cases.end(),
            [](const FusedCase& a, const FusedCase& b) { return a.image_id < b.image_id; });
  for (auto& c : ds.cases) {
    std::sort(c.annotations.begin(), c.annotations.end(), annotation_less);
    if (!c.annotations.empty()) c.abnormal = true;
  }

  std::vector<std::pair<std::uint64_t, std::size_t>> eligible;  // (priority, case index)
  bool any_abnormal = false;
  for (std::size_t i = 0; i < ds.cases.size(); ++i) {
    const auto& c = ds.cases[i];
    if (c.annotations.empty()) continue;
    any_abnormal = true;
    if (c.annotations.size() < std::max<std::size_t>(config.min_boxes_for_removal, 1)) continue;
    const auto p = DeterministicRng::substream(config.seed, "simulation/select/" + c.image_id)
                       .next_u64();
    eligible.emplace_back(p, i);
  }
  if (!any_abnormal) {
    throw Error(ErrorCode::kNoAbnormalCases, "simulation needs at least one abnormal case");
  }

  std::sort(eligible.begin(), eligible.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return ds.cases[a.second].image_id < ds.cases[b.second].image_id;
  });
  const auto n_select = static_cast<std::size_t>(
      std::llround(config.fraction * static_cast<double>(eligible.size())));

  for (std::size_t rank = 0; rank < n_select; ++rank) {
    auto& c = ds.cases[eligible[rank].second];
    auto rng = DeterministicRng::substream(config.seed, "simulation/remove/" + c.image_id);
    const auto pick = static_cast<std::ptrdiff_t>(rng.uniform_index(c.annotations.size()));
    ds.misses.push_back({c.image_id, c.annotations[pick], config.seed, rank});
    c.annotations.erase(c.annotations.begin() + pick);
  }
  std::sort(ds.misses.begin(), ds.misses.end(),
            [](const MissRecord& a, const MissRecord& b) { return a.image_id < b.image_id; });
  return ds;
}

std::map<std::string, std::vector<BBox>, std::less<>> ground_truth_boxes(const ErrorDataset& ds) {
  std::map<std::string, std::vector<BBox>, std::less<>> out;
  for (const auto& c : ds.cases) {
    auto& boxes = out[c.image_id];
    for (const auto& a : c.annotations) boxes.push_back(a.box);
  }
  for (const auto& m : ds.misses) out[m.image_id].push_back(m.removed.box);
  for (auto& [id, boxes] : out) std::sort(boxes.begin(), boxes.end());
  return out;
}

}  // namespace missref
