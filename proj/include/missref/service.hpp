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

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "missref/detector_gateway.hpp"
#include "missref/differential.hpp"
#include "missref/fusion.hpp"
#include "missref/ingestion.hpp"
#include "missref/json_io.hpp"

namespace httplib {
class Server;
}

namespace missref {

struct AnnotationVersion {
  int version = 0;
  std::vector<LabeledBox> boxes;
};

enum class ReferralStatus { kPending, kAccepted, kRejected };

struct IssuedReferral {
  std::string referral_id;
  Detection detection;
  ReferralStatus status = ReferralStatus::kPending;
};

struct IssuedReferralSet {
  int round = 0;
  int annotation_version = 0;
  std::string provider;
  std::optional<GateVerdict> gate;
  std::vector<IssuedReferral> referrals;
  std::vector<std::string> warnings;  // not persisted
};

struct Decision {
  std::string referral_id;
  bool accepted = false;
  std::optional<BBox> adjusted_box;
  std::string label;
  std::string timestamp;
  std::optional<int> resulting_version;
};

struct SessionImage {
  std::string image_id;
  std::string format;     // "png" or "jpeg"
  std::string reference;  // stored file path or caller-supplied reference
  ImageDims original;
};

// Everything known about a session. Only apply_session_event() mutates it,
// both for live requests and for log replay.
struct SessionState {
  std::string session_id;
  std::string created_at;
  SessionImage image;
  std::vector<AnnotationVersion> versions;
  std::vector<IssuedReferralSet> referral_sets;
  std::vector<Decision> decisions;
  int next_referral = 1;
};

Json session_state_to_json(const SessionState& s);

void apply_session_event(SessionState& state, const Json& event);

// Rebuilds a session from its event log.
SessionState replay_session_log(const std::filesystem::path& log_path);

using Clock = std::function<std::string()>;

// Current UTC time as an ISO-8601 string with millisecond precision.
std::string utc_timestamp();

struct ServiceConfig {
  std::filesystem::path data_dir;
  PipelineConfig pipeline;
};

// Owns all sessions. Each session has an append-only JSONL event log under
// data_dir/sessions; the log is the source of truth and is replayed on
// construction. Writes to one session are serialized: a write that arrives
// while another is in progress fails with kConflict.
class SessionStore {
 public:
  SessionStore(ServiceConfig config, std::shared_ptr<DetectionProvider> provider,
               std::shared_ptr<NormalcyGate> gate = nullptr, Clock clock = utc_timestamp);

  // Stores a PNG or JPEG payload. `content_type` must agree with the magic
  // bytes; otherwise kUnsupportedFormat.
  std::string create_session(std::string_view payload, std::string_view content_type,
                             ImageDims dims, std::string image_id = {});
  // Registers an image the detector can resolve by reference (.png/.jpg/.jpeg).
  std::string create_session_from_reference(const std::string& reference, ImageDims dims,
                                            std::string image_id = {});

  // Appends a new annotation version and returns its number. When
  // `base_version` is given and is not the latest version, fails with kConflict.
  int put_annotations(const std::string& session_id, std::vector<LabeledBox> boxes,
                      std::optional<int> base_version = std::nullopt);

  // Runs the referral pipeline on the latest annotations. Repeated calls with
  // unchanged annotations and provider return the stored set.
  IssuedReferralSet get_recommendations(const std::string& session_id);

  struct DecisionResult {
    Decision decision;
    std::optional<int> version;
  };
  DecisionResult decide(const std::string& session_id, const std::string& referral_id,
                        bool accept, std::optional<BBox> adjusted_box = std::nullopt,
                        std::optional<std::string> label = std::nullopt);

  SessionState state(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  std::filesystem::path log_path(const std::string& session_id) const;

 private:
  struct Slot {
    std::mutex mutex;
    SessionState state;
  };

  Slot& slot(const std::string& session_id) const;
  std::string register_session(SessionImage image);
  void append_event(const SessionState& state, const Json& event);

  ServiceConfig config_;
  std::shared_ptr<DetectionProvider> provider_;
  std::shared_ptr<NormalcyGate> gate_;
  Clock clock_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Slot>> sessions_;
  int next_session_ = 1;
};

// HTTP status for an error code.
int http_status(ErrorCode code);

// Installs the REST routes on `server`:
//   POST /sessions
//   PUT  /sessions/{id}/annotations
//   POST /sessions/{id}/recommendations
//   POST /sessions/{id}/referrals/{rid}/decision
//   GET  /sessions/{id}
void register_routes(httplib::Server& server, SessionStore& store);

// Reads {"data_dir", "provider", "gate"?, "confidence_floor"?} and builds a
// store. Relative paths resolve against the config file's directory.
std::unique_ptr<SessionStore> make_store_from_config(const std::filesystem::path& config_path);

// Blocks serving HTTP until the process is stopped.
void run_server(SessionStore& store, const std::string& host, int port);

}  // namespace missref
