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

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "missref/detection.hpp"
#include "missref/simulation.hpp"

namespace missref {

using DetectionsByImage = std::map<std::string, std::vector<Detection>, std::less<>>;
using BoxesByImage = std::map<std::string, std::vector<BBox>, std::less<>>;

struct ReferralMatch {
  MissRecord miss;
  Detection referral;
  double iou = 0.0;

  bool operator==(const ReferralMatch&) const = default;
};

struct FalseReferral {
  std::string image_id;
  Detection referral;

  bool operator==(const FalseReferral&) const = default;
};

// Outcome counts. TR and FD count misses, FR counts referrals, TD counts
// images with neither a miss nor a referral.
struct OutcomeLedger {
  std::size_t tr = 0;
  std::size_t fr = 0;
  std::size_t fd = 0;
  std::size_t td = 0;
  std::vector<ReferralMatch> matches;
  std::vector<MissRecord> unmatched_misses;
  std::vector<FalseReferral> false_referrals;
  std::vector<std::string> td_cases;

  bool operator==(const OutcomeLedger&) const = default;
};

// Appends `other` into `into`. Counts add; lists concatenate.
void merge_into(OutcomeLedger& into, const OutcomeLedger& other);

inline constexpr double kDefaultMatchThreshold = 0.0;

// Greedy one-to-one matching for a single image: candidate (miss, referral)
// pairs with IoU > match_threshold are taken in descending IoU order, ties by
// miss index then referral index.
OutcomeLedger classify_image(std::string_view image_id, std::span<const Detection> referrals,
                             std::span<const MissRecord> misses,
                             double match_threshold = kDefaultMatchThreshold);

// Classifies every case in the dataset; images without an entry in
// `referrals` have no referrals. Throws kUnknownImage when `referrals` names
// an image the dataset does not contain.
OutcomeLedger classify_outcomes(const DetectionsByImage& referrals, const ErrorDataset& dataset,
                                double match_threshold = kDefaultMatchThreshold);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Names of ratios whose denominator was zero and were reported as 0.
  std::vector<std::string> undefined;
};

// Throws kEmptyLedger when all four counts are zero.
MetricsReport compute_metrics(const OutcomeLedger& ledger);
MetricsReport compute_metrics(std::size_t tr, std::size_t fr, std::size_t fd, std::size_t td);

double f1_score(double precision, double recall) noexcept;

struct IouStatistics {
  double median = 0.0;
  std::vector<std::pair<double, double>> cdf;  // (threshold, fraction <= threshold)
  double fraction_above_half = 0.0;
  std::size_t count = 0;
};

// Median (midpoint for even counts), empirical CDF at 0, 0.05, ..., 1 and the
// share of values strictly above 0.5. Throws kNoMatches on empty input.
IouStatistics iou_statistics(std::span<const double> ious);
IouStatistics iou_statistics(const OutcomeLedger& ledger);

// Plain-text rendering of counts, ratios and IoU summary.
std::string summary_table(const OutcomeLedger& ledger, const MetricsReport& metrics);

struct DetectorEvalConfig {
  double iou_threshold = 0.5;
  double confidence_floor = 0.0;
};

struct DetectorMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double map50 = 0.0;
  std::size_t true_positives = 0;   // at the confidence floor
  std::size_t false_positives = 0;  // at the confidence floor
  std::size_t ground_truth = 0;
  std::vector<std::string> undefined;
};

// Single-class detection scoring. Predictions are ranked by confidence over
// all images; each takes the best-overlapping unmatched ground truth box of
// its image when IoU >= iou_threshold. AP is the area under the all-point
// interpolated precision-recall curve.
DetectorMetrics evaluate_detector(const DetectionsByImage& predictions,
                                  const BoxesByImage& ground_truth,
                                  const DetectorEvalConfig& config = {});

}  // namespace missref
