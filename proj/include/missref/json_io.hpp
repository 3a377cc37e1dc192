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

// JSON forms of the domain types. These are the interchange formats shared
// by the CLI, the HTTP service and the golden tests; key order is the
// library default (sorted), so equal values always serialize to equal bytes.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "missref/detection.hpp"
#include "missref/differential.hpp"
#include "missref/error.hpp"
#include "missref/evaluation.hpp"
#include "missref/fusion.hpp"
#include "missref/ingestion.hpp"
#include "missref/simulation.hpp"

namespace missref {

using Json = nlohmann::json;

// Default-constructible types use ADL hooks; the rest have adl_serializer
// specializations below.
void to_json(Json& j, const ImageDims& d);
void from_json(const Json& j, ImageDims& d);
void to_json(Json& j, const CaseRecord& c);
void to_json(Json& j, const RejectedRow& r);
void to_json(Json& j, const FusedCase& c);
void from_json(const Json& j, FusedCase& c);
void to_json(Json& j, const SimulationConfig& c);
void from_json(const Json& j, SimulationConfig& c);
void to_json(Json& j, const ErrorDataset& ds);
void from_json(const Json& j, ErrorDataset& ds);
void to_json(Json& j, const ReferralSet& r);
void from_json(const Json& j, ReferralSet& r);
void to_json(Json& j, const SplitManifest& m);
void from_json(const Json& j, SplitManifest& m);
void to_json(Json& j, const OutcomeLedger& l);
void to_json(Json& j, const MetricsReport& m);
void to_json(Json& j, const IouStatistics& s);
void to_json(Json& j, const DetectorMetrics& m);

// Converts with T's JSON hooks; library type errors and missing keys become
// Error(kMalformedInput) naming `what`. Domain errors (for example
// kInvalidBox) propagate unchanged.
template <class T>
T parse_as(const Json& j, std::string_view what);

Json parse_json_text(std::string_view text, std::string_view what);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Two-space indented dump with a trailing newline.
std::string dump_canonical(const Json& j);

// Detections keyed by image from {"images": [{"image_id", "detections": [...]}]}.
DetectionsByImage detections_by_image_from_json(const Json& j);
Json detections_by_image_to_json(const DetectionsByImage& d);

}  // namespace missref

namespace nlohmann {

template <>
struct adl_serializer<missref::BBox> {
  static missref::BBox from_json(const json& j);
  static void to_json(json& j, const missref::BBox& b);
};

// Flat wire form: {x_min, y_min, x_max, y_max, confidence, label?}.
template <>
struct adl_serializer<missref::Detection> {
  static missref::Detection from_json(const json& j);
  static void to_json(json& j, const missref::Detection& d);
};

template <>
struct adl_serializer<missref::LabeledBox> {
  static missref::LabeledBox from_json(const json& j);
  static void to_json(json& j, const missref::LabeledBox& b);
};

template <>
struct adl_serializer<missref::ReaderAnnotation> {
  static missref::ReaderAnnotation from_json(const json& j);
  static void to_json(json& j, const missref::ReaderAnnotation& a);
};

template <>
struct adl_serializer<missref::FusedAnnotation> {
  static missref::FusedAnnotation from_json(const json& j);
  static void to_json(json& j, const missref::FusedAnnotation& a);
};

template <>
struct adl_serializer<missref::MissRecord> {
  static missref::MissRecord from_json(const json& j);
  static void to_json(json& j, const missref::MissRecord& m);
};

template <>
struct adl_serializer<missref::ReferralMatch> {
  static void to_json(json& j, const missref::ReferralMatch& m);
};

template <>
struct adl_serializer<missref::FalseReferral> {
  static void to_json(json& j, const missref::FalseReferral& f);
};

}  // namespace nlohmann

namespace missref {

template <class T>
T parse_as(const Json& j, std::string_view what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, std::string(what) + ": " + e.what());
  }
}

}  // namespace missref
