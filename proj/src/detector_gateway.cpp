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

#include "missref/detector_gateway.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>

#include "missref/error.hpp"
#include "missref/rng.hpp"
#include "missref/simulation.hpp"

namespace missref {
namespace {

struct HttpTarget {
  std::string origin;  // scheme://host:port
  std::string path;
};

HttpTarget split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint '" + endpoint + "' lacks a scheme");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

void apply_timeout(httplib::Client& client, double timeout_s) {
  const auto sec = static_cast<time_t>(timeout_s);
  const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read;
}

[[noreturn]] void schema_error(std::string_view image_id, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation,
              "detector response for '" + std::string(image_id) + "': " + what);
}

double require_number(const Json& obj, const char* key, std::string_view image_id) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    schema_error(image_id, std::string("field '") + key + "' missing or not a number");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) schema_error(image_id, std::string("field '") + key + "' not finite");
  return v;
}

BoxesByImage load_ground_truth(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  if (j.contains("misses")) return ground_truth_boxes(parse_as<ErrorDataset>(j, path.string()));
  BoxesByImage out;
  for (const auto& c : parse_as<std::vector<FusedCase>>(j.at("cases"), path.string())) {
    auto& boxes = out[c.image_id];
    for (const auto& a : c.annotations) boxes.push_back(a.box);
  }
  return out;
}

BBox repair_box(double x0, double y0, double x1, double y1) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  x0 = std::clamp(x0, 0.0, kCanonicalFrame);
  x1 = std::clamp(x1, 0.0, kCanonicalFrame);
  y0 = std::clamp(y0, 0.0, kCanonicalFrame);
  y1 = std::clamp(y1, 0.0, kCanonicalFrame);
  // Keep at least one pixel of extent inside the frame.
  if (x1 - x0 < 1.0) {
    x0 = std::min(x0, kCanonicalFrame - 1.0);
    x1 = x0 + 1.0;
  }
  if (y1 - y0 < 1.0) {
    y0 = std::min(y0, kCanonicalFrame - 1.0);
    y1 = y0 + 1.0;
  }
  return BBox(x0, y0, x1, y1);
}

}  // namespace

std::string_view provider_kind_name(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::kStaticManifest: return "static-manifest";
    case ProviderKind::kRemoteEndpoint: return "remote-endpoint";
    case ProviderKind::kJitterOracle: return "jitter-oracle";
  }
  return "static-manifest";
}

DetectorProviderConfig provider_config_from_json(const Json& j,
                                                 const std::filesystem::path& base_dir) {
  try {
    DetectorProviderConfig c;
    const auto kind = j.at("kind").get<std::string>();
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    auto forbid = [&](std::initializer_list<const char*> keys) {
      for (const char* k : keys) {
        if (j.contains(k)) {
          throw Error(ErrorCode::kInvalidArgument,
                      "provider kind '" + kind + "' does not take field '" + k + "'");
        }
      }
    };
    if (kind == "static-manifest") {
      c.kind = ProviderKind::kStaticManifest;
      forbid({"endpoint", "ground_truth", "sigma", "extras", "drops"});
      c.manifest = resolve(j.at("manifest").get<std::string>());
    } else if (kind == "remote-endpoint") {
      c.kind = ProviderKind::kRemoteEndpoint;
      forbid({"manifest", "ground_truth", "sigma", "extras", "drops"});
      c.endpoint = j.at("endpoint").get<std::string>();
      split_endpoint(c.endpoint);
    } else if (kind == "jitter-oracle") {
      c.kind = ProviderKind::kJitterOracle;
      forbid({"manifest", "endpoint"});
      if (j.contains("ground_truth")) c.ground_truth = resolve(j.at("ground_truth").get<std::string>());
      c.jitter.sigma_px = j.value("sigma", 0.0);
      c.jitter.extras = j.value("extras", 0);
      c.jitter.drops = j.value("drops", 0);
      c.jitter.seed = j.value("seed", std::uint64_t{0});
      c.jitter.true_confidence = j.value("true_confidence", 0.9);
      if (c.jitter.sigma_px < 0.0 || c.jitter.extras < 0 || c.jitter.drops < 0 ||
          c.jitter.true_confidence < 0.0 || c.jitter.true_confidence > 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "jitter settings out of range");
      }
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown provider kind '" + kind + "'");
    }
    c.timeout_s = j.value("timeout", c.timeout_s);
    c.confidence_floor = j.value("confidence_floor", c.confidence_floor);
    if (!(c.timeout_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
    if (!(c.confidence_floor >= 0.0 && c.confidence_floor <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "confidence_floor must lie in [0, 1]");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, std::string("provider config: ") + e.what());
  }
}

Json to_json(const DetectorProviderConfig& c) {
  Json j{{"kind", provider_kind_name(c.kind)},
         {"timeout", c.timeout_s},
         {"confidence_floor", c.confidence_floor}};
  switch (c.kind) {
    case ProviderKind::kStaticManifest: j["manifest"] = c.manifest.string(); break;
    case ProviderKind::kRemoteEndpoint: j["endpoint"] = c.endpoint; break;
    case ProviderKind::kJitterOracle:
      if (!c.ground_truth.empty()) j["ground_truth"] = c.ground_truth.string();
      j["sigma"] = c.jitter.sigma_px;
      j["extras"] = c.jitter.extras;
      j["drops"] = c.jitter.drops;
      j["seed"] = c.jitter.seed;
      j["true_confidence"] = c.jitter.true_confidence;
      break;
  }
  return j;
}

StaticManifestProvider::StaticManifestProvider(DetectionsByImage manifest, std::string name)
    : manifest_(std::move(manifest)), name_(std::move(name)) {}

std::vector<Detection> StaticManifestProvider::detect(const DetectionRequest& request) {
  auto it = manifest_.find(request.image_id);
  if (it == manifest_.end()) {
    throw Error(ErrorCode::kUnknownImage, "manifest has no entry for '" + request.image_id + "'");
  }
  return it->second;
}

RemoteDetectionProvider::RemoteDetectionProvider(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  if (!(timeout_s_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
  split_endpoint(endpoint_);
}

std::vector<Detection> RemoteDetectionProvider::detect(const DetectionRequest& request) {
  const auto target = split_endpoint(endpoint_);
  httplib::Client client(target.origin);
  apply_timeout(client, timeout_s_);
  const auto body = make_detection_request(request).dump();
  auto res = client.Post(target.path, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (is_timeout(err)) {
      throw Error(ErrorCode::kProviderTimeout,
                  "detector at " + endpoint_ + " timed out for '" + request.image_id + "'");
    }
    throw Error(ErrorCode::kDetectorUnavailable,
                "detector at " + endpoint_ + " unreachable: " + httplib::to_string(err));
  }
  if (res->status == 404) {
    throw Error(ErrorCode::kUnknownImage, "detector does not know '" + request.image_id + "'");
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kDetectorUnavailable,
                "detector returned HTTP " + std::to_string(res->status));
  }
  Json parsed;
  try {
    parsed = Json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    schema_error(request.image_id, "body is not JSON");
  }
  return parse_detection_response(parsed, request.image_id);
}

JitterOracleProvider::JitterOracleProvider(BoxesByImage ground_truth, JitterSettings settings)
    : ground_truth_(std::move(ground_truth)), settings_(settings) {
  for (auto& [id, boxes] : ground_truth_) std::sort(boxes.begin(), boxes.end());
}

std::string JitterOracleProvider::describe() const {
  return "jitter-oracle:sigma=" + std::to_string(settings_.sigma_px) +
         ",extras=" + std::to_string(settings_.extras) +
         ",drops=" + std::to_string(settings_.drops) + ",seed=" + std::to_string(settings_.seed);
}

std::vector<Detection> JitterOracleProvider::detect(const DetectionRequest& request) {
  auto it = ground_truth_.find(request.image_id);
  if (it == ground_truth_.end()) {
    throw Error(ErrorCode::kUnknownImage, "no ground truth for '" + request.image_id + "'");
  }
  auto rng = DeterministicRng::substream(settings_.seed, "jitter/" + request.image_id);
  std::vector<BBox> boxes = it->second;
  JitterLogEntry entry;

  const auto n_drop = std::min<std::size_t>(static_cast<std::size_t>(settings_.drops), boxes.size());
  for (std::size_t k = 0; k < n_drop; ++k) {
    const auto pick = static_cast<std::ptrdiff_t>(rng.uniform_index(boxes.size()));
    entry.dropped.push_back(boxes[static_cast<std::size_t>(pick)]);
    boxes.erase(boxes.begin() + pick);
  }

  std::vector<Detection> out;
  for (const auto& b : boxes) {
    if (settings_.sigma_px == 0.0) {
      out.emplace_back(b, settings_.true_confidence, std::string(kAbnormalLabel));
      continue;
    }
    const double s = settings_.sigma_px;
    const double x0 = b.x_min() + s * rng.normal();
    const double y0 = b.y_min() + s * rng.normal();
    const double x1 = b.x_max() + s * rng.normal();
    const double y1 = b.y_max() + s * rng.normal();
    out.emplace_back(repair_box(x0, y0, x1, y1), settings_.true_confidence,
                     std::string(kAbnormalLabel));
  }

  for (int k = 0; k < settings_.extras; ++k) {
    const double w = rng.uniform(16.0, 160.0);
    const double h = rng.uniform(16.0, 160.0);
    const double x0 = rng.uniform(0.0, kCanonicalFrame - w);
    const double y0 = rng.uniform(0.0, kCanonicalFrame - h);
    const double conf = rng.uniform(0.3, 0.85);
    BBox extra(x0, y0, x0 + w, y0 + h);
    entry.extras.push_back(extra);
    out.emplace_back(extra, conf, std::string(kAbnormalLabel));
  }

  {
    std::lock_guard lock(log_mutex_);
    log_[request.image_id] = std::move(entry);
  }
  return out;
}

std::map<std::string, JitterLogEntry> JitterOracleProvider::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::unique_ptr<DetectionProvider> make_provider(const DetectorProviderConfig& config,
                                                 const BoxesByImage* fallback_truth) {
  switch (config.kind) {
    case ProviderKind::kStaticManifest:
      return std::make_unique<StaticManifestProvider>(
          detections_by_image_from_json(read_json_file(config.manifest)),
          "static-manifest:" + config.manifest.string());
    case ProviderKind::kRemoteEndpoint:
      return std::make_unique<RemoteDetectionProvider>(config.endpoint, config.timeout_s);
    case ProviderKind::kJitterOracle: {
      if (!config.ground_truth.empty()) {
        return std::make_unique<JitterOracleProvider>(load_ground_truth(config.ground_truth),
                                                      config.jitter);
      }
      if (fallback_truth == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, "jitter-oracle needs ground truth boxes");
      }
      return std::make_unique<JitterOracleProvider>(*fallback_truth, config.jitter);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown provider kind");
}

std::vector<Detection> get_detections(const std::string& image_id, DetectionProvider& provider) {
  return provider.detect({image_id, {}});
}

Json make_detection_request(const DetectionRequest& request) {
  Json j{{"image_id", request.image_id},
         {"canonical_frame", {static_cast<int>(kCanonicalFrame), static_cast<int>(kCanonicalFrame)}}};
  if (!request.image_reference.empty()) j["image_reference"] = request.image_reference;
  return j;
}

std::vector<Detection> parse_detection_response(const Json& response,
                                                std::string_view expected_image_id) {
  if (!response.is_object()) schema_error(expected_image_id, "response is not an object");
  auto id = response.find("image_id");
  if (id == response.end() || !id->is_string()) schema_error(expected_image_id, "missing image_id");
  if (id->get<std::string>() != expected_image_id) {
    schema_error(expected_image_id, "image_id mismatch ('" + id->get<std::string>() + "')");
  }
  auto dets = response.find("detections");
  if (dets == response.end() || !dets->is_array()) {
    schema_error(expected_image_id, "missing detections array");
  }

  std::vector<Detection> out;
  out.reserve(dets->size());
  for (std::size_t i = 0; i < dets->size(); ++i) {
    const auto& d = (*dets)[i];
    const auto where = "detection " + std::to_string(i) + ": ";
    if (!d.is_object()) schema_error(expected_image_id, where + "not an object");
    const double x0 = require_number(d, "x_min", expected_image_id);
    const double y0 = require_number(d, "y_min", expected_image_id);
    const double x1 = require_number(d, "x_max", expected_image_id);
    const double y1 = require_number(d, "y_max", expected_image_id);
    const double conf = require_number(d, "confidence", expected_image_id);
    if (!is_valid_box(x0, y0, x1, y1) || x1 > kCanonicalFrame || y1 > kCanonicalFrame) {
      schema_error(expected_image_id, where + "box invalid or outside the canonical frame");
    }
    if (conf < 0.0 || conf > 1.0) schema_error(expected_image_id, where + "confidence outside [0, 1]");
    std::optional<std::string> label;
    if (auto l = d.find("label"); l != d.end() && !l->is_null()) {
      if (!l->is_string() || !is_known_label(l->get<std::string>())) {
        schema_error(expected_image_id, where + "unknown label");
      }
      label = l->get<std::string>();
    }
    out.emplace_back(BBox(x0, y0, x1, y1), conf, std::move(label));
  }
  return out;
}

StaticNormalcyGate::StaticNormalcyGate(std::map<std::string, GateVerdict, std::less<>> verdicts)
    : verdicts_(std::move(verdicts)) {}

GateResult StaticNormalcyGate::classify(const std::string& image_id) {
  auto it = verdicts_.find(image_id);
  if (it == verdicts_.end()) return {GateVerdict::kUnavailable, "no gate verdict for '" + image_id + "'"};
  return {it->second, std::nullopt};
}

RemoteNormalcyGate::RemoteNormalcyGate(std::string endpoint, double timeout_s)
    : endpoint_(std::move(endpoint)), timeout_s_(timeout_s) {
  if (!(timeout_s_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
  split_endpoint(endpoint_);
}

GateResult RemoteNormalcyGate::classify(const std::string& image_id) {
  const auto target = split_endpoint(endpoint_);
  httplib::Client client(target.origin);
  apply_timeout(client, timeout_s_);
  auto res = client.Post(target.path, Json{{"image_id", image_id}}.dump(), "application/json");
  if (!res) {
    const auto reason = is_timeout(res.error()) ? std::string("provider-timeout")
                                                : httplib::to_string(res.error());
    return {GateVerdict::kUnavailable, "normalcy gate failed for '" + image_id + "': " + reason};
  }
  if (res->status != 200) {
    return {GateVerdict::kUnavailable,
            "normalcy gate returned HTTP " + std::to_string(res->status)};
  }
  try {
    const auto j = Json::parse(res->body);
    if (j.at("image_id").get<std::string>() == image_id) {
      if (auto v = parse_gate_verdict(j.at("verdict").get<std::string>());
          v && *v != GateVerdict::kUnavailable) {
        return {*v, std::nullopt};
      }
    }
  } catch (const nlohmann::json::exception&) {
  }
  return {GateVerdict::kUnavailable, "normalcy gate response failed validation"};
}

GateResult gate_normalcy(const std::string& image_id, NormalcyGate* gate) {
  if (gate == nullptr) return {GateVerdict::kUnavailable, std::nullopt};
  return gate->classify(image_id);
}

std::unique_ptr<NormalcyGate> make_gate(const Json& j, const std::filesystem::path& base_dir) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "remote-endpoint") {
      return std::make_unique<RemoteNormalcyGate>(j.at("endpoint").get<std::string>(),
                                                  j.value("timeout", 10.0));
    }
    if (kind != "static-table") {
      throw Error(ErrorCode::kInvalidArgument, "unknown gate kind '" + kind + "'");
    }
    Json table;
    if (j.contains("verdicts")) {
      table = j.at("verdicts");
    } else {
      std::filesystem::path p(j.at("path").get<std::string>());
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      table = read_json_file(p);
    }
    std::map<std::string, GateVerdict, std::less<>> verdicts;
    for (const auto& [id, v] : table.items()) {
      auto verdict = parse_gate_verdict(v.get<std::string>());
      if (!verdict) throw Error(ErrorCode::kMalformedInput, "bad verdict for '" + id + "'");
      verdicts[id] = *verdict;
    }
    return std::make_unique<StaticNormalcyGate>(std::move(verdicts));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, std::string("gate config: ") + e.what());
  }
}

}  // namespace missref
