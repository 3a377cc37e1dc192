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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "missref/detection.hpp"
#include "missref/differential.hpp"
#include "missref/evaluation.hpp"
#include "missref/json_io.hpp"

namespace missref {

enum class ProviderKind { kStaticManifest, kRemoteEndpoint, kJitterOracle };

std::string_view provider_kind_name(ProviderKind kind);

struct JitterSettings {
  double sigma_px = 0.0;  // std-dev of per-coordinate Gaussian noise
  int extras = 0;         // spurious boxes added per image
  int drops = 0;          // true boxes removed per image
  std::uint64_t seed = 0;
  double true_confidence = 0.9;

  bool operator==(const JitterSettings&) const = default;
};

struct DetectorProviderConfig {
  ProviderKind kind = ProviderKind::kStaticManifest;
  std::filesystem::path manifest;      // static-manifest
  std::string endpoint;                // remote-endpoint, e.g. http://127.0.0.1:8090/detect
  std::filesystem::path ground_truth;  // jitter-oracle; optional, fused cases or error dataset
  JitterSettings jitter;
  double timeout_s = 10.0;
  double confidence_floor = kDefaultConfidenceFloor;
};

// Parses a provider block. Relative paths resolve against `base_dir`.
// Throws kInvalidArgument when the kind is unknown, fields of another kind
// are present, or timeout <= 0.
DetectorProviderConfig provider_config_from_json(const Json& j,
                                                 const std::filesystem::path& base_dir = {});
Json to_json(const DetectorProviderConfig& c);

struct DetectionRequest {
  std::string image_id;
  std::string image_reference;  // path or URI the provider can resolve; may be empty
};

// Source of detections for one image, in the canonical frame. Implementations
// must be safe to call concurrently for distinct images.
class DetectionProvider {
 public:
  virtual ~DetectionProvider() = default;
  virtual std::vector<Detection> detect(const DetectionRequest& request) = 0;
  // Identity used to decide whether cached results are still valid.
  virtual std::string describe() const = 0;
};

// Returns recorded detections verbatim. Unknown ids throw kUnknownImage.
class StaticManifestProvider final : public DetectionProvider {
 public:
  explicit StaticManifestProvider(DetectionsByImage manifest, std::string name = "static-manifest");
  std::vector<Detection> detect(const DetectionRequest& request) override;
  std::string describe() const override { return name_; }

 private:
  DetectionsByImage manifest_;
  std::string name_;
};

// One HTTP POST per image; the response must pass parse_detection_response().
class RemoteDetectionProvider final : public DetectionProvider {
 public:
  RemoteDetectionProvider(std::string endpoint, double timeout_s);
  std::vector<Detection> detect(const DetectionRequest& request) override;
  std::string describe() const override { return "remote-endpoint:" + endpoint_; }

 private:
  std::string endpoint_;
  double timeout_s_;
};

struct JitterLogEntry {
  std::vector<BBox> dropped;
  std::vector<BBox> extras;
};

// Mock detector: the image's ground-truth boxes moved by seeded Gaussian
// noise, minus `drops` seeded removals, plus `extras` seeded spurious boxes.
// All draws come from a per-image stream, so results do not depend on call
// order.
class JitterOracleProvider final : public DetectionProvider {
 public:
  JitterOracleProvider(BoxesByImage ground_truth, JitterSettings settings);
  std::vector<Detection> detect(const DetectionRequest& request) override;
  std::string describe() const override;

  std::map<std::string, JitterLogEntry> log() const;

 private:
  BoxesByImage ground_truth_;
  JitterSettings settings_;
  mutable std::mutex log_mutex_;
  std::map<std::string, JitterLogEntry> log_;
};

// Builds the configured provider. A jitter oracle takes its ground truth from
// config.ground_truth when set, otherwise from `fallback_truth`; with neither
// it throws kInvalidArgument.
std::unique_ptr<DetectionProvider> make_provider(const DetectorProviderConfig& config,
                                                 const BoxesByImage* fallback_truth = nullptr);

std::vector<Detection> get_detections(const std::string& image_id, DetectionProvider& provider);

// Wire protocol.
Json make_detection_request(const DetectionRequest& request);
// Validates a provider response and returns its detections. Any deviation
// from the schema (wrong image id, missing or mistyped field, confidence
// outside [0, 1], invalid or out-of-frame box, unknown label) throws
// kSchemaViolation.
std::vector<Detection> parse_detection_response(const Json& response,
                                                std::string_view expected_image_id);

struct GateResult {
  GateVerdict verdict = GateVerdict::kUnavailable;
  std::optional<std::string> warning;
};

class NormalcyGate {
 public:
  virtual ~NormalcyGate() = default;
  virtual GateResult classify(const std::string& image_id) = 0;
};

// Per-image verdict table; ids missing from the table are unavailable.
class StaticNormalcyGate final : public NormalcyGate {
 public:
  explicit StaticNormalcyGate(std::map<std::string, GateVerdict, std::less<>> verdicts);
  GateResult classify(const std::string& image_id) override;

 private:
  std::map<std::string, GateVerdict, std::less<>> verdicts_;
};

// POSTs {image_id} and expects {image_id, verdict}. Every failure, timeouts
// included, yields unavailable with a warning.
class RemoteNormalcyGate final : public NormalcyGate {
 public:
  RemoteNormalcyGate(std::string endpoint, double timeout_s);
  GateResult classify(const std::string& image_id) override;

 private:
  std::string endpoint_;
  double timeout_s_;
};

// Unconfigured gate (nullptr) gives unavailable.
GateResult gate_normalcy(const std::string& image_id, NormalcyGate* gate);

// {"kind": "static-table", "verdicts": {id: "normal"|"abnormal"}} or
// {"kind": "static-table", "path": file} or
// {"kind": "remote-endpoint", "endpoint": url, "timeout": seconds}.
std::unique_ptr<NormalcyGate> make_gate(const Json& j, const std::filesystem::path& base_dir = {});

}  // namespace missref
