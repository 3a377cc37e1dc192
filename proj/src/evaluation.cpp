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

#include "missref/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <tuple>

#include "missref/error.hpp"

namespace missref {
namespace {

double ratio(std::size_t num, std::size_t den, std::string_view name,
             std::vector<std::string>& undefined) {
  if (den == 0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void merge_into(OutcomeLedger& into, const OutcomeLedger& other) {
  into.tr += other.tr;
  into.fr += other.fr;
  into.fd += other.fd;
  into.td += other.td;
  into.matches.insert(into.matches.end(), other.matches.begin(), other.matches.end());
  into.unmatched_misses.insert(into.unmatched_misses.end(), other.unmatched_misses.begin(),
                               other.unmatched_misses.end());
  into.false_referrals.insert(into.false_referrals.end(), other.false_referrals.begin(),
                              other.false_referrals.end());
  into.td_cases.insert(into.td_cases.end(), other.td_cases.begin(), other.td_cases.end());
}

OutcomeLedger classify_image(std::string_view image_id, std::span<const Detection> referrals,
                             std::span<const MissRecord> misses, double match_threshold) {
  OutcomeLedger ledger;
  if (misses.empty() && referrals.empty()) {
    ledger.td = 1;
    ledger.td_cases.emplace_back(image_id);
    return ledger;
  }

  struct Candidate {
    double iou;
    std::size_t miss;
    std::size_t referral;
  };
  std::vector<Candidate> candidates;
  for (std::size_t m = 0; m < misses.size(); ++m) {
    for (std::size_t r = 0; r < referrals.size(); ++r) {
      const double v = iou(misses[m].removed.box, referrals[r].box);
      if (v > match_threshold) candidates.push_back({v, m, r});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.iou, a.miss, a.referral) < std::tie(a.iou, b.miss, b.referral);
  });

  std::vector<bool> miss_used(misses.size(), false);
  std::vector<bool> referral_used(referrals.size(), false);
  for (const auto& c : candidates) {
    if (miss_used[c.miss] || referral_used[c.referral]) continue;
    miss_used[c.miss] = referral_used[c.referral] = true;
    ledger.matches.push_back({misses[c.miss], referrals[c.referral], c.iou});
  }
  for (std::size_t m = 0; m < misses.size(); ++m) {
    if (!miss_used[m]) ledger.unmatched_misses.push_back(misses[m]);
  }
  for (std::size_t r = 0; r < referrals.size(); ++r) {
    if (!referral_used[r]) ledger.false_referrals.push_back({std::string(image_id), referrals[r]});
  }
  ledger.tr = ledger.matches.size();
  ledger.fd = ledger.unmatched_misses.size();
  ledger.fr = ledger.false_referrals.size();
  return ledger;
}

OutcomeLedger classify_outcomes(const DetectionsByImage& referrals, const ErrorDataset& dataset,
                                double match_threshold) {
  std::map<std::string_view, std::vector<MissRecord>> misses_by_image;
  for (const auto& m : dataset.misses) misses_by_image[m.image_id].push_back(m);

  std::map<std::string_view, const FusedCase*> cases;
  for (const auto& c : dataset.cases) cases[c.image_id] = &c;
  for (const auto& [id, dets] : referrals) {
    if (!cases.contains(id)) {
      throw Error(ErrorCode::kUnknownImage, "referrals name unknown image '" + id + "'");
    }
  }

  OutcomeLedger total;
  const std::vector<Detection> none;
  const std::vector<MissRecord> no_misses;
  for (const auto& [id, c] : cases) {
    auto r_it = referrals.find(id);
    auto m_it = misses_by_image.find(id);
    const auto& image_refs = r_it == referrals.end() ? none : r_it->second;
    const auto& image_misses = m_it == misses_by_image.end() ? no_misses : m_it->second;
    merge_into(total, classify_image(id, image_refs, image_misses, match_threshold));
  }
  if (total.tr + total.fd != dataset.misses.size()) {
    throw Error(ErrorCode::kInvariantViolation, "TR + FD does not equal the number of misses");
  }
  return total;
}

double f1_score(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

MetricsReport compute_metrics(std::size_t tr, std::size_t fr, std::size_t fd, std::size_t td) {
  const std::size_t total = tr + fr + fd + td;
  if (total == 0) throw Error(ErrorCode::kEmptyLedger, "no outcomes to score");
  MetricsReport m;
  m.precision = ratio(tr, tr + fr, "precision", m.undefined);
  m.recall = ratio(tr, tr + fd, "recall", m.undefined);
  m.accuracy = ratio(tr + td, total, "accuracy", m.undefined);
  if (m.precision + m.recall == 0.0) m.undefined.emplace_back("f1");
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

MetricsReport compute_metrics(const OutcomeLedger& ledger) {
  return compute_metrics(ledger.tr, ledger.fr, ledger.fd, ledger.td);
}

IouStatistics iou_statistics(std::span<const double> ious) {
  if (ious.empty()) throw Error(ErrorCode::kNoMatches, "IoU statistics need at least one match");
  std::vector<double> v(ious.begin(), ious.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();

  IouStatistics s;
  s.count = n;
  s.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  for (int k = 0; k <= 20; ++k) {
    const double t = static_cast<double>(k) / 20.0;
    const auto at_most = std::upper_bound(v.begin(), v.end(), t) - v.begin();
    s.cdf.emplace_back(t, static_cast<double>(at_most) / static_cast<double>(n));
  }
  const auto above = v.end() - std::upper_bound(v.begin(), v.end(), 0.5);
  s.fraction_above_half = static_cast<double>(above) / static_cast<double>(n);
  return s;
}

IouStatistics iou_statistics(const OutcomeLedger& ledger) {
  std::vector<double> v;
  v.reserve(ledger.matches.size());
  for (const auto& m : ledger.matches) v.push_back(m.iou);
  return iou_statistics(v);
}

std::string summary_table(const OutcomeLedger& ledger, const MetricsReport& metrics) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "                 referred   deferred\n";
  os << "  missed       TR " << std::setw(6) << ledger.tr << "  FD " << std::setw(6)
     << ledger.fd << '\n';
  os << "  not missed   FR " << std::setw(6) << ledger.fr << "  TD " << std::setw(6)
     << ledger.td << "\n\n";
  os << "  Precision  Recall  F1-score  Accuracy\n";
  os << "  " << std::setw(9) << metrics.precision << "  " << std::setw(6) << metrics.recall
     << "  " << std::setw(8) << metrics.f1 << "  " << std::setw(8) << metrics.accuracy << '\n';
  if (!ledger.matches.empty()) {
    const auto stats = iou_statistics(ledger);
    os << "\n  match IoU: n=" << stats.count << "  median=" << stats.median
       << "  >0.5=" << stats.fraction_above_half << '\n';
  }
  return os.str();
}

DetectorMetrics evaluate_detector(const DetectionsByImage& predictions,
                                  const BoxesByImage& ground_truth,
                                  const DetectorEvalConfig& config) {
  struct Ranked {
    const std::string* image;
    const Detection* det;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, dets] : predictions) {
    for (const auto& d : dets) ranked.push_back({&id, &d});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.det->confidence != b.det->confidence) return a.det->confidence > b.det->confidence;
    if (*a.image != *b.image) return *a.image < *b.image;
    return ranks_before(*a.det, *b.det);
  });

  std::map<std::string_view, std::vector<bool>> used;
  std::size_t n_gt = 0;
  for (const auto& [id, boxes] : ground_truth) {
    used[id].assign(boxes.size(), false);
    n_gt += boxes.size();
  }

  DetectorMetrics out;
  out.ground_truth = n_gt;
  std::vector<double> precisions, recalls;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    bool hit = false;
    if (auto gt_it = ground_truth.find(*r.image); gt_it != ground_truth.end()) {
      auto& flags = used[gt_it->first];
      std::optional<std::size_t> best;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gt_it->second.size(); ++g) {
        if (flags[g]) continue;
        const double v = iou(r.det->box, gt_it->second[g]);
        if (v >= config.iou_threshold && (!best || v > best_iou)) {
          best = g;
          best_iou = v;
        }
      }
      if (best) {
        flags[*best] = true;
        hit = true;
      }
    }
    if (hit) ++tp;
    if (r.det->confidence >= config.confidence_floor) {
      (hit ? out.true_positives : out.false_positives) += 1;
    }
    precisions.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recalls.push_back(n_gt ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0);
  }

  out.precision = ratio(out.true_positives, out.true_positives + out.false_positives, "precision",
                        out.undefined);
  out.recall = ratio(out.true_positives, n_gt, "recall", out.undefined);
  if (n_gt == 0) {
    out.undefined.emplace_back("map50");
    return out;
  }
  // Precision envelope, then area under the step curve.
  for (std::size_t k = precisions.size(); k-- > 1;) {
    precisions[k - 1] = std::max(precisions[k - 1], precisions[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precisions.size(); ++k) {
    ap += (recalls[k] - prev_recall) * precisions[k];
    prev_recall = recalls[k];
  }
  out.map50 = ap;
  return out;
}

}  // namespace missref
