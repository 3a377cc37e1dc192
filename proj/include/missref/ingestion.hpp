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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "missref/geometry.hpp"

namespace missref {

struct ImageDims {
  double width = 0.0;
  double height = 0.0;

  bool operator==(const ImageDims&) const = default;
};

inline constexpr ImageDims kCanonicalDims{kCanonicalFrame, kCanonicalFrame};

struct ReaderAnnotation {
  BBox box;  // canonical frame
  std::string label;
  std::string reader_id;

  bool operator==(const ReaderAnnotation&) const = default;
};

// All reader boxes for one image, rescaled to the canonical frame.
struct CaseRecord {
  std::string image_id;
  ImageDims original;
  std::vector<ReaderAnnotation> annotations;

  bool is_normal() const noexcept { return annotations.empty(); }
};

// A row that could not be turned into an annotation. `line` is 1-based and
// counts the header.
struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
  std::string raw;
};

struct ParseResult {
  std::vector<CaseRecord> cases;  // sorted by image_id
  std::vector<RejectedRow> rejects;
};

using DimensionsTable = std::map<std::string, ImageDims, std::less<>>;

// Reads an `image_id,width,height` table. Throws kMissingColumn on a bad
// header and kUnparseableRow on a bad row (dimensions are not optional).
DimensionsTable read_dimensions(std::istream& in);

// Reads a VinDr-style annotation table with columns image_id, class_name,
// x_min, y_min, x_max, y_max and rad_id (or reader_id). Extra columns are
// ignored. "No finding" rows carry empty or NaN coordinates and add no box.
// Bad rows go to ParseResult::rejects. Throws kMissingColumn and
// kUnknownImageDimensions.
ParseResult parse_annotations(std::istream& table, const DimensionsTable& dims);

// Clamps raw coordinates into [0, from.width] x [0, from.height], validates,
// then scales into `to`. Throws kInvalidArgument for non-positive dims and
// kDegenerateAfterClamp when the clamped box has no area.
BBox clamp_and_rescale(double x_min, double y_min, double x_max, double y_max,
                       ImageDims from, ImageDims to = kCanonicalDims);

BBox rescale(const BBox& box, ImageDims from, ImageDims to = kCanonicalDims);

inline constexpr double kTestFraction = 0.20;
inline constexpr double kValidationFraction = 0.20;

struct CaseStatus {
  std::string image_id;
  bool is_normal = false;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train;       // each list sorted by image_id
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::vector<std::string> warnings;
};

// Selects every abnormal case plus an equal-size seeded sample of normal
// cases, then carves out test (20%) and validation (20% of the rest),
// stratified so each split stays balanced. Throws kNoAbnormalCases.
SplitManifest balance_and_split(std::span<const CaseStatus> cases, std::uint64_t seed);
SplitManifest balance_and_split(std::span<const CaseRecord> cases, std::uint64_t seed);

}  // namespace missref
