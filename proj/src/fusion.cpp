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

#include "missref/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>

#include "missref/error.hpp"

namespace missref {
namespace {

bool cluster_less(const FusedAnnotation& a, const FusedAnnotation& b) {
  return std::tie(a.box, a.labels, a.sources) < std::tie(b.box, b.labels, b.sources);
}

FusedAnnotation merge(const FusedAnnotation& a, const FusedAnnotation& b) {
  const BBox pair[] = {a.box, b.box};
  FusedAnnotation out{hull(pair), a.source_count + b.source_count, a.labels, a.sources};
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.sources.insert(out.sources.end(), b.sources.begin(), b.sources.end());
  std::sort(out.labels.begin(), out.labels.end());
  std::sort(out.sources.begin(), out.sources.end());
  return out;
}

}  // namespace

std::vector<FusedAnnotation> fuse(std::span<const LabeledBox> boxes, double threshold) {
  if (!std::isfinite(threshold) || threshold <= 0.0 || threshold > 1.0) {
    throw Error(ErrorCode::kInvalidThreshold,
                "fusion threshold must lie in (0, 1], got " + std::to_string(threshold));
  }

  std::vector<FusedAnnotation> clusters;
  clusters.reserve(boxes.size());
  for (const auto& b : boxes) clusters.push_back({b.box, 1, {b.label}, {b.box}});
  // Canonical order makes the pair scan below independent of input order.
  std::sort(clusters.begin(), clusters.end(), cluster_less);

  for (;;) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double best_iou = 0.0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double v = iou(clusters[i].box, clusters[j].box);
        if (v < threshold) continue;
        // i < j in canonical order, so the first pair reached at a given IoU
        // is the lexicographically smallest one.
        if (!best || v > best_iou) {
          best = {i, j};
          best_iou = v;
        }
      }
    }
    if (!best) break;

    auto merged = merge(clusters[best->first], clusters[best->second]);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best->second));
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best->first));
    clusters.insert(std::upper_bound(clusters.begin(), clusters.end(), merged, cluster_less),
                    std::move(merged));
  }
  return clusters;
}

}  // namespace missref
