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

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "missref/suppression.hpp"
#include "oracles.hpp"

namespace missref {
namespace {

Detection det(double x0, double y0, double x1, double y1, double c) {
  return Detection(BBox(x0, y0, x1, y1), c);
}

TEST(Suppression, Examples) {
  EXPECT_TRUE(suppress_zero_overlap({}).empty());

  const std::vector<Detection> in{det(0, 0, 10, 10, 0.9), det(5, 5, 15, 15, 0.8),
                                  det(20, 20, 30, 30, 0.5)};
  const std::vector<Detection> want{det(0, 0, 10, 10, 0.9), det(20, 20, 30, 30, 0.5)};
  EXPECT_EQ(suppress_zero_overlap(in), want);

  const std::vector<Detection> dup{det(0, 0, 10, 10, 0.3), det(0, 0, 10, 10, 0.7)};
  const std::vector<Detection> dup_want{det(0, 0, 10, 10, 0.7)};
  EXPECT_EQ(suppress_zero_overlap(dup), dup_want);
}

TEST(Suppression, ChainKeepsNonAdjacentBoxes) {
  // b overlaps both a and c, a and c are disjoint: removing b frees c.
  const std::vector<Detection> in{det(0, 0, 10, 10, 0.9), det(8, 0, 18, 10, 0.8),
                                  det(16, 0, 26, 10, 0.7)};
  const auto out = suppress_zero_overlap(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], in[0]);
  EXPECT_EQ(out[1], in[2]);
}

TEST(Suppression, EdgeTouchingBoxesBothSurvive) {
  const std::vector<Detection> in{det(0, 0, 10, 10, 0.9), det(10, 0, 20, 10, 0.8)};
  EXPECT_EQ(suppress_zero_overlap(in).size(), 2u);
}

std::vector<Detection> random_instance(oracle::TestRng& rng, int max_n) {
  std::vector<Detection> dets;
  const int n = rng.uniform_int(0, max_n);
  for (int i = 0; i < n; ++i) {
    const auto b = oracle::random_int_box(rng, 128, 4, 48);
    // Coarse confidences so ties actually happen.
    const double c = rng.uniform_int(1, 5) / 5.0;
    dets.push_back(det(b[0], b[1], b[2], b[3], c));
  }
  return dets;
}

TEST(Suppression, MatchesSubsetEnumerationOracle) {
  oracle::TestRng rng(21);
  for (int t = 0; t < 150; ++t) {
    const auto dets = random_instance(rng, 8);
    std::vector<oracle::ScoredBox> raw;
    for (const auto& d : dets) {
      raw.push_back({{d.box.x_min(), d.box.y_min(), d.box.x_max(), d.box.y_max()}, d.confidence});
    }
    const auto keep = oracle::brute_force_nms(raw);
    std::vector<Detection> want;
    for (auto i : keep) want.push_back(dets[i]);
    std::sort(want.begin(), want.end(), ranks_before);
    EXPECT_EQ(suppress_zero_overlap(dets), want) << "instance " << t;
  }
}

TEST(Suppression, Properties) {
  oracle::TestRng rng(22);
  for (int t = 0; t < 300; ++t) {
    const auto dets = random_instance(rng, 12);
    const auto out = suppress_zero_overlap(dets);
    // Pairwise zero overlap.
    EXPECT_TRUE(is_zero_overlap(out));
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) EXPECT_EQ(iou(out[i].box, out[j].box), 0.0);
    }
    // Sub-multiset of the input.
    auto pool = dets;
    for (const auto& d : out) {
      auto it = std::find(pool.begin(), pool.end(), d);
      ASSERT_NE(it, pool.end());
      pool.erase(it);
    }
    // Every suppressed box overlaps a retained box ranked before it.
    for (const auto& d : pool) {
      EXPECT_TRUE(std::any_of(out.begin(), out.end(), [&](const Detection& k) {
        return overlaps(k.box, d.box) && k.confidence >= d.confidence;
      }));
    }
    // Boxes disjoint from everything are preserved.
    for (std::size_t i = 0; i < dets.size(); ++i) {
      bool isolated = true;
      for (std::size_t j = 0; j < dets.size(); ++j) {
        if (i != j && overlaps(dets[i].box, dets[j].box)) isolated = false;
      }
      if (isolated) EXPECT_NE(std::find(out.begin(), out.end(), dets[i]), out.end());
    }
    // Idempotent and input-order independent.
    EXPECT_EQ(suppress_zero_overlap(out), out);
    auto reversed = dets;
    std::reverse(reversed.begin(), reversed.end());
    EXPECT_EQ(suppress_zero_overlap(reversed), out);
  }
}

}  // namespace
}  // namespace missref
