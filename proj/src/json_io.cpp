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

#include "missref/json_io.hpp"

#include <fstream>
#include <sstream>

#include "missref/rng.hpp"

namespace nlohmann {

missref::BBox adl_serializer<missref::BBox>::from_json(const json& j) {
  return missref::BBox(j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                       j.at("x_max").get<double>(), j.at("y_max").get<double>());
}

void adl_serializer<missref::BBox>::to_json(json& j, const missref::BBox& b) {
  j = json{{"x_min", b.x_min()}, {"y_min", b.y_min()}, {"x_max", b.x_max()}, {"y_max", b.y_max()}};
}

missref::Detection adl_serializer<missref::Detection>::from_json(const json& j) {
  std::optional<std::string> label;
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) label = it->get<std::string>();
  return missref::Detection(j.get<missref::BBox>(), j.at("confidence").get<double>(),
                            std::move(label));
}

void adl_serializer<missref::Detection>::to_json(json& j, const missref::Detection& d) {
  j = json(d.box);
  j["confidence"] = d.confidence;
  if (d.label) j["label"] = *d.label;
}

missref::LabeledBox adl_serializer<missref::LabeledBox>::from_json(const json& j) {
  return {j.at("box").get<missref::BBox>(), j.value("label", std::string(missref::kAbnormalLabel))};
}

void adl_serializer<missref::LabeledBox>::to_json(json& j, const missref::LabeledBox& b) {
  j = json{{"box", b.box}, {"label", b.label}};
}

missref::ReaderAnnotation adl_serializer<missref::ReaderAnnotation>::from_json(const json& j) {
  return {j.at("box").get<missref::BBox>(), j.at("label").get<std::string>(),
          j.value("reader_id", std::string())};
}

void adl_serializer<missref::ReaderAnnotation>::to_json(json& j,
                                                        const missref::ReaderAnnotation& a) {
  j = json{{"box", a.box}, {"label", a.label}, {"reader_id", a.reader_id}};
}

missref::FusedAnnotation adl_serializer<missref::FusedAnnotation>::from_json(const json& j) {
  missref::FusedAnnotation a{j.at("box").get<missref::BBox>(), j.value("source_count", 1),
                             j.value("labels", std::vector<std::string>{}), {}};
  if (auto it = j.find("sources"); it != j.end()) a.sources = it->get<std::vector<missref::BBox>>();
  if (a.source_count < 1) {
    throw missref::Error(missref::ErrorCode::kMalformedInput, "source_count must be >= 1");
  }
  return a;
}

void adl_serializer<missref::FusedAnnotation>::to_json(json& j, const missref::FusedAnnotation& a) {
  j = json{{"box", a.box},
           {"source_count", a.source_count},
           {"labels", a.labels},
           {"sources", a.sources}};
}

missref::MissRecord adl_serializer<missref::MissRecord>::from_json(const json& j) {
  return {j.at("image_id").get<std::string>(), j.at("removed").get<missref::FusedAnnotation>(),
          j.at("seed").get<std::uint64_t>(), j.at("draw_index").get<std::size_t>()};
}

void adl_serializer<missref::MissRecord>::to_json(json& j, const missref::MissRecord& m) {
  j = json{{"image_id", m.image_id},
           {"removed", m.removed},
           {"seed", m.seed},
           {"draw_index", m.draw_index}};
}

void adl_serializer<missref::ReferralMatch>::to_json(json& j, const missref::ReferralMatch& m) {
  j = json{{"image_id", m.miss.image_id},
           {"miss", m.miss.removed.box},
           {"referral", m.referral},
           {"iou", m.iou}};
}

void adl_serializer<missref::FalseReferral>::to_json(json& j, const missref::FalseReferral& f) {
  j = json{{"image_id", f.image_id}, {"referral", f.referral}};
}

}  // namespace nlohmann

namespace missref {

void to_json(Json& j, const ImageDims& d) { j = Json{{"width", d.width}, {"height", d.height}}; }

void from_json(const Json& j, ImageDims& d) {
  d.width = j.at("width").get<double>();
  d.height = j.at("height").get<double>();
  if (!(d.width > 0.0 && d.height > 0.0)) {
    throw Error(ErrorCode::kMalformedInput, "image dimensions must be positive");
  }
}

void to_json(Json& j, const CaseRecord& c) {
  j = Json{{"image_id", c.image_id},
           {"original", c.original},
           {"is_normal", c.is_normal()},
           {"annotations", c.annotations}};
}

void to_json(Json& j, const RejectedRow& r) {
  j = Json{{"line", r.line}, {"reason", r.reason}, {"raw", r.raw}};
}

void to_json(Json& j, const FusedCase& c) {
  j = Json{{"image_id", c.image_id},
           {"original", c.original},
           {"abnormal", c.abnormal},
           {"annotations", c.annotations}};
}

void from_json(const Json& j, FusedCase& c) {
  c.image_id = j.at("image_id").get<std::string>();
  c.original = j.at("original").get<ImageDims>();
  c.annotations = j.at("annotations").get<std::vector<FusedAnnotation>>();
  c.abnormal = j.value("abnormal", !c.annotations.empty());
}

void to_json(Json& j, const SimulationConfig& c) {
  j = Json{{"fraction", c.fraction},
           {"fusion_threshold", c.fusion_threshold},
           {"seed", c.seed},
           {"min_boxes_for_removal", c.min_boxes_for_removal},
           {"rng", DeterministicRng::kRngName}};
}

void from_json(const Json& j, SimulationConfig& c) {
  c.fraction = j.at("fraction").get<double>();
  c.fusion_threshold = j.at("fusion_threshold").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.min_boxes_for_removal = j.value("min_boxes_for_removal", std::size_t{1});
  if (auto rng = j.value("rng", std::string(DeterministicRng::kRngName));
      rng != DeterministicRng::kRngName) {
    throw Error(ErrorCode::kMalformedInput, "dataset was generated with rng '" + rng + "'");
  }
}

void to_json(Json& j, const ErrorDataset& ds) {
  j = Json{{"config", ds.config}, {"cases", ds.cases}, {"misses", ds.misses}};
}

void from_json(const Json& j, ErrorDataset& ds) {
  ds.config = j.at("config").get<SimulationConfig>();
  ds.cases = j.at("cases").get<std::vector<FusedCase>>();
  ds.misses = j.at("misses").get<std::vector<MissRecord>>();
}

void to_json(Json& j, const ReferralSet& r) {
  j = Json{{"image_id", r.image_id},
           {"referrals", r.referrals},
           {"annotations_used", r.annotations_used},
           {"gate", r.gate ? Json(gate_verdict_name(*r.gate)) : Json(nullptr)}};
}

void from_json(const Json& j, ReferralSet& r) {
  r.image_id = j.at("image_id").get<std::string>();
  r.referrals = j.at("referrals").get<std::vector<Detection>>();
  r.annotations_used = j.value("annotations_used", std::vector<BBox>{});
  r.gate.reset();
  if (auto it = j.find("gate"); it != j.end() && !it->is_null()) {
    r.gate = parse_gate_verdict(it->get<std::string>());
    if (!r.gate) throw Error(ErrorCode::kMalformedInput, "unknown gate verdict");
  }
}

void to_json(Json& j, const SplitManifest& m) {
  j = Json{{"seed", m.seed},
           {"rng", DeterministicRng::kRngName},
           {"train", m.train},
           {"validation", m.validation},
           {"test", m.test},
           {"warnings", m.warnings}};
}

void from_json(const Json& j, SplitManifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.train = j.at("train").get<std::vector<std::string>>();
  m.validation = j.at("validation").get<std::vector<std::string>>();
  m.test = j.at("test").get<std::vector<std::string>>();
  m.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(Json& j, const OutcomeLedger& l) {
  j = Json{{"TR", l.tr},
           {"FR", l.fr},
           {"FD", l.fd},
           {"TD", l.td},
           {"matches", l.matches},
           {"unmatched_misses", l.unmatched_misses},
           {"false_referrals", l.false_referrals},
           {"td_cases", l.td_cases}};
}

void to_json(Json& j, const MetricsReport& m) {
  j = Json{{"precision", m.precision},
           {"recall", m.recall},
           {"f1", m.f1},
           {"accuracy", m.accuracy},
           {"undefined", m.undefined}};
}

void to_json(Json& j, const IouStatistics& s) {
  Json cdf = Json::array();
  for (const auto& [t, f] : s.cdf) cdf.push_back(Json{{"threshold", t}, {"fraction", f}});
  j = Json{{"median", s.median},
           {"cdf", cdf},
           {"fraction_above_half", s.fraction_above_half},
           {"count", s.count}};
}

void to_json(Json& j, const DetectorMetrics& m) {
  j = Json{{"precision", m.precision},
           {"recall", m.recall},
           {"map50", m.map50},
           {"true_positives", m.true_positives},
           {"false_positives", m.false_positives},
           {"ground_truth", m.ground_truth},
           {"undefined", m.undefined}};
}

Json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kMalformedInput, std::string(what) + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot move output into '" + path.string() + "'");
  }
}

std::string dump_canonical(const Json& j) { return j.dump(2) + "\n"; }

DetectionsByImage detections_by_image_from_json(const Json& j) {
  DetectionsByImage out;
  for (const auto& entry : j.at("images")) {
    auto& dets = out[entry.at("image_id").get<std::string>()];
    auto more = entry.at("detections").get<std::vector<Detection>>();
    dets.insert(dets.end(), more.begin(), more.end());
  }
  return out;
}

Json detections_by_image_to_json(const DetectionsByImage& d) {
  Json images = Json::array();
  for (const auto& [id, dets] : d) images.push_back(Json{{"image_id", id}, {"detections", dets}});
  return Json{{"images", images}};
}

}  // namespace missref
