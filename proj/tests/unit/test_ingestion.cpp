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
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "missref/error.hpp"
#include "missref/ingestion.hpp"
#include "missref/json_io.hpp"
#include "missref/rng.hpp"
#include "oracles.hpp"

namespace missref {
namespace {

DimensionsTable dims_of(std::initializer_list<std::pair<std::string, ImageDims>> v) {
  DimensionsTable t;
  for (auto& [k, d] : v) t.emplace(k, d);
  return t;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvariantViolation;
}

const char* kHeader = "image_id,class_name,x_min,y_min,x_max,y_max,rad_id\n";

TEST(Rng, SplitMixReferenceSequence) {
  // Published SplitMix64 outputs for state 0.
  DeterministicRng r(0);
  EXPECT_EQ(r.next_u64(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(r.next_u64(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(r.next_u64(), 0x06c45d188009454fULL);
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Ingestion, RescaleExamples) {
  EXPECT_EQ(rescale(BBox(0, 0, 640, 480), {640, 480}), BBox(0, 0, 1024, 1024));
  const BBox b = rescale(BBox(500, 500, 1000, 1000), {2000, 2000});
  EXPECT_EQ(b, BBox(256, 256, 512, 512));
  const BBox back = rescale(b, kCanonicalDims, {2000, 2000});
  EXPECT_EQ(back, BBox(500, 500, 1000, 1000));

  const BBox c = clamp_and_rescale(100, 200, 400, 500, {2000, 2500});
  EXPECT_NEAR(c.x_min(), 51.2, 1e-12);
  EXPECT_NEAR(c.y_min(), 81.92, 1e-12);
  EXPECT_NEAR(c.x_max(), 204.8, 1e-12);
  EXPECT_NEAR(c.y_max(), 204.8, 1e-12);
}

TEST(Ingestion, RescaleRoundTripProperty) {
  oracle::TestRng rng(41);
  for (int t = 0; t < 500; ++t) {
    const ImageDims d{static_cast<double>(rng.uniform_int(256, 4000)),
                      static_cast<double>(rng.uniform_int(256, 4000))};
    const double x0 = rng.uniform01() * d.width * 0.9, y0 = rng.uniform01() * d.height * 0.9;
    const double x1 = x0 + 1 + rng.uniform01() * (d.width - x0 - 1);
    const double y1 = y0 + 1 + rng.uniform01() * (d.height - y0 - 1);
    const BBox canon = clamp_and_rescale(x0, y0, x1, y1, d);
    EXPECT_GE(canon.x_min(), 0.0);
    EXPECT_LE(canon.x_max(), kCanonicalFrame);
    EXPECT_LE(canon.y_max(), kCanonicalFrame);
    const BBox back = rescale(canon, kCanonicalDims, d);
    EXPECT_NEAR(back.x_min(), x0, 1e-9 * d.width);
    EXPECT_NEAR(back.y_min(), y0, 1e-9 * d.height);
    EXPECT_NEAR(back.x_max(), x1, 1e-9 * d.width);
    EXPECT_NEAR(back.y_max(), y1, 1e-9 * d.height);
  }
}

TEST(Ingestion, ClampThenValidate) {
  EXPECT_EQ(clamp_and_rescale(-10, -10, 3000, 3000, {2048, 2048}), BBox(0, 0, 1024, 1024));
  EXPECT_EQ(code_of([] { clamp_and_rescale(2100, 10, 2200, 20, {2048, 2048}); }),
            ErrorCode::kDegenerateAfterClamp);
  EXPECT_EQ(code_of([] { clamp_and_rescale(0, 0, 1, 1, {0, 100}); }), ErrorCode::kInvalidArgument);
}

TEST(Ingestion, ParseExamples) {
  std::istringstream in(std::string(kHeader) +
                        "img1,Cardiomegaly,100,200,400,500,R1\n"
                        "img2,No finding,,,,,R1\n"
                        "img3,Nodule/Mass,400,200,100,500,R2\n");
  const auto dims = dims_of({{"img1", {2000, 2500}}, {"img2", {1024, 1024}}, {"img3", {2000, 2000}}});
  const auto r = parse_annotations(in, dims);
  ASSERT_EQ(r.cases.size(), 3u);
  EXPECT_EQ(r.cases[0].image_id, "img1");
  ASSERT_EQ(r.cases[0].annotations.size(), 1u);
  const auto& a = r.cases[0].annotations[0];
  EXPECT_EQ(a.label, "Cardiomegaly");
  EXPECT_EQ(a.reader_id, "R1");
  EXPECT_EQ(a.box, rescale(BBox(100, 200, 400, 500), {2000, 2500}));
  EXPECT_EQ(r.cases[0].original, (ImageDims{2000, 2500}));
  EXPECT_TRUE(r.cases[1].is_normal());
  // The inverted row is reported, never silently dropped.
  ASSERT_EQ(r.rejects.size(), 1u);
  EXPECT_EQ(r.rejects[0].line, 4u);
  EXPECT_NE(r.rejects[0].raw.find("img3"), std::string::npos);
  EXPECT_TRUE(r.cases[2].is_normal());
}

TEST(Ingestion, NullSpellingsQuotingAndExtraColumns) {
  std::istringstream in(
      "\xEF\xBB\xBFimage_id,rad_id,class_name,class_id,x_min,y_min,x_max,y_max\r\n"
      "img1,R1,No finding,14,nan,NaN,,\r\n"
      "\"img1\",R2,\"Nodule/Mass\",8,10.5,10,20,30\r\n"
      "img1,R3,Other lesion,9, 1 , 2 , 3 , 4 \r\n");
  const auto r = parse_annotations(in, dims_of({{"img1", {1024, 1024}}}));
  EXPECT_TRUE(r.rejects.empty()) << r.rejects.front().reason;
  ASSERT_EQ(r.cases.size(), 1u);
  ASSERT_EQ(r.cases[0].annotations.size(), 2u);
  EXPECT_EQ(r.cases[0].annotations[0].box, BBox(10.5, 10, 20, 30));
  EXPECT_EQ(r.cases[0].annotations[1].box, BBox(1, 2, 3, 4));
}

TEST(Ingestion, RejectReasons) {
  std::istringstream in(std::string(kHeader) +
                        "img1,No finding,1,2,3,4,R1\n"
                        "img1,Broken bone,1,2,3,4,R1\n"
                        "img1,ILD,,,,,R1\n"
                        "img1,ILD,a,2,3,4,R1\n"
                        "img1,ILD,5000,5000,6000,6000,R1\n"
                        "img1,ILD,1,2\n");
  const auto r = parse_annotations(in, dims_of({{"img1", {1024, 1024}}}));
  ASSERT_EQ(r.rejects.size(), 6u);
  for (std::size_t i = 0; i < r.rejects.size(); ++i) EXPECT_EQ(r.rejects[i].line, i + 2);
  EXPECT_NE(r.rejects[4].reason.find("degenerate-after-clamp"), std::string::npos);
  ASSERT_EQ(r.cases.size(), 1u);
  EXPECT_TRUE(r.cases[0].is_normal());
}

TEST(Ingestion, HardErrors) {
  std::istringstream missing("image_id,class_name,x_min,y_min,x_max,rad_id\n");
  EXPECT_EQ(code_of([&] { parse_annotations(missing, {}); }), ErrorCode::kMissingColumn);
  std::istringstream unknown(std::string(kHeader) + "ghost,ILD,1,2,3,4,R1\n");
  EXPECT_EQ(code_of([&] { parse_annotations(unknown, {}); }), ErrorCode::kUnknownImageDimensions);
  std::istringstream bad_dims("image_id,width,height\nimg1,abc,10\n");
  EXPECT_EQ(code_of([&] { read_dimensions(bad_dims); }), ErrorCode::kUnparseableRow);
}

TEST(Ingestion, AllBoxesInsideCanonicalFrame) {
  std::ifstream dims_file(std::string(MISSREF_DATA_DIR) + "/toy/dims.csv");
  std::ifstream table(std::string(MISSREF_DATA_DIR) + "/toy/annotations.csv");
  const auto r = parse_annotations(table, read_dimensions(dims_file));
  EXPECT_EQ(r.cases.size(), 40u);
  EXPECT_EQ(r.rejects.size(), 1u);
  for (const auto& c : r.cases) {
    EXPECT_EQ(c.is_normal(), c.image_id.rfind("toy_n", 0) == 0);
    for (const auto& a : c.annotations) {
      EXPECT_GE(a.box.x_min(), 0.0);
      EXPECT_GE(a.box.y_min(), 0.0);
      EXPECT_LE(a.box.x_max(), kCanonicalFrame);
      EXPECT_LE(a.box.y_max(), kCanonicalFrame);
      EXPECT_TRUE(is_known_label(a.label));
    }
  }
}

std::vector<CaseStatus> make_cases(int abnormal, int normal) {
  std::vector<CaseStatus> v;
  char buf[16];
  for (int i = 1; i <= abnormal; ++i) {
    std::snprintf(buf, sizeof buf, "a%02d", i);
    v.push_back({buf, false});
  }
  for (int i = 1; i <= normal; ++i) {
    std::snprintf(buf, sizeof buf, "n%02d", i);
    v.push_back({buf, true});
  }
  return v;
}

// Seeded-shuffle oracle for the split: every id draws a priority from its
// own keyed stream; lists are ordered by (priority, id).
std::vector<std::string> oracle_order(std::vector<std::string> ids, std::uint64_t seed,
                                      const std::string& stream) {
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  for (auto& id : ids) {
    keyed.emplace_back(DeterministicRng::substream(seed, stream + "/" + id).next_u64(), id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (auto& k : keyed) out.push_back(k.second);
  return out;
}

TEST(Split, TenAbnormalThirtyNormalSeedSeven) {
  const auto cases = make_cases(10, 30);
  const auto m = balance_and_split(std::span<const CaseStatus>(cases), 7);
  EXPECT_EQ(m.test.size(), 4u);   // round(0.2 * 20)
  EXPECT_EQ(m.validation.size(), 3u);  // round(0.2 * 16)
  EXPECT_EQ(m.train.size(), 13u);
  EXPECT_TRUE(m.warnings.empty());

  // Oracle: sample 10 normals, then take 2+2 test, then val, rest train.
  std::vector<std::string> ab, no;
  for (auto& c : cases) (c.is_normal ? no : ab).push_back(c.image_id);
  no = oracle_order(no, 7, "split/normal-sample");
  no.resize(10);
  ab = oracle_order(ab, 7, "split/order/abnormal");
  no = oracle_order(no, 7, "split/order/normal");
  std::vector<std::string> want_test{ab[0], ab[1], no[0], no[1]};
  std::sort(want_test.begin(), want_test.end());
  EXPECT_EQ(m.test, want_test);
  // Validation of 3 from 8 + 8 puts 2 on one stratum, 1 on the other.
  std::vector<std::string> want_val{ab[2], ab[3], no[2]};
  std::sort(want_val.begin(), want_val.end());
  EXPECT_EQ(m.validation, want_val);

  // Frozen membership.
  const auto golden = read_json_file(std::string(MISSREF_GOLDEN_DIR) + "/split_10a_30n_seed7.json");
  EXPECT_EQ(Json(m), golden);
}

TEST(Split, Invariants) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    for (auto [na, nn] : {std::pair{10, 30}, {7, 7}, {3, 50}, {25, 40}, {1, 1}}) {
      const auto cases = make_cases(na, nn);
      const auto m = balance_and_split(std::span<const CaseStatus>(cases), seed);
      const std::size_t n = m.train.size() + m.validation.size() + m.test.size();
      EXPECT_EQ(n, static_cast<std::size_t>(2 * na));
      EXPECT_EQ(m.test.size(), static_cast<std::size_t>(std::llround(0.2 * n)));
      EXPECT_EQ(m.validation.size(),
                static_cast<std::size_t>(std::llround(0.2 * (n - m.test.size()))));
      std::set<std::string> all;
      for (const auto* l : {&m.train, &m.validation, &m.test}) {
        int ab = 0, no = 0;
        for (const auto& id : *l) {
          EXPECT_TRUE(all.insert(id).second) << "duplicate " << id;
          (id[0] == 'a' ? ab : no)++;
        }
        EXPECT_LE(std::abs(ab - no), 1) << "seed " << seed;
      }
      for (int i = 1; i <= na; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "a%02d", i);
        EXPECT_TRUE(all.count(buf));
      }
      // Determinism.
      const auto again = balance_and_split(std::span<const CaseStatus>(cases), seed);
      EXPECT_EQ(Json(again), Json(m));
    }
  }
}

TEST(Split, NoNormalsWarns) {
  const auto cases = make_cases(6, 0);
  const auto m = balance_and_split(std::span<const CaseStatus>(cases), 3);
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_EQ(m.warnings[0].rfind("insufficient-normals", 0), 0u);
  EXPECT_EQ(m.train.size() + m.validation.size() + m.test.size(), 6u);
  const auto none = make_cases(0, 5);
  EXPECT_EQ(code_of([&] { balance_and_split(std::span<const CaseStatus>(none), 3); }),
            ErrorCode::kNoAbnormalCases);
}

}  // namespace
}  // namespace missref
