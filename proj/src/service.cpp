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

#include "missref/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <httplib.h>

#include "missref/error.hpp"

namespace missref {
namespace {

constexpr std::string_view kPngMagic = "\x89PNG\r\n\x1a\n";
constexpr std::string_view kJpegMagic = "\xFF\xD8\xFF";

std::string_view status_name(ReferralStatus s) {
  switch (s) {
    case ReferralStatus::kPending: return "pending";
    case ReferralStatus::kAccepted: return "accepted";
    case ReferralStatus::kRejected: return "rejected";
  }
  return "pending";
}

void require_canonical(const BBox& b) {
  if (b.x_max() > kCanonicalFrame || b.y_max() > kCanonicalFrame) {
    throw Error(ErrorCode::kInvalidBox, "box " + b.to_string() + " leaves the canonical frame");
  }
}

void require_label(const std::string& label) {
  if (!is_known_label(label)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown label '" + label + "'");
  }
}

[[noreturn]] void invariant(const std::string& what) {
  throw Error(ErrorCode::kInvariantViolation, "session log: " + what);
}

Json referral_set_to_json(const IssuedReferralSet& set) {
  Json refs = Json::array();
  for (const auto& r : set.referrals) {
    refs.push_back(Json{{"referral_id", r.referral_id},
                        {"detection", r.detection},
                        {"status", status_name(r.status)}});
  }
  return Json{{"round", set.round},
              {"annotation_version", set.annotation_version},
              {"provider", set.provider},
              {"gate", set.gate ? Json(gate_verdict_name(*set.gate)) : Json(nullptr)},
              {"referrals", refs}};
}

Json decision_to_json(const Decision& d) {
  Json j{{"referral_id", d.referral_id},
         {"decision", d.accepted ? "accept" : "reject"},
         {"label", d.label},
         {"timestamp", d.timestamp}};
  j["box"] = d.adjusted_box ? Json(*d.adjusted_box) : Json(nullptr);
  j["resulting_version"] = d.resulting_version ? Json(*d.resulting_version) : Json(nullptr);
  return j;
}

IssuedReferral* find_referral(SessionState& s, std::string_view referral_id) {
  for (auto& set : s.referral_sets) {
    for (auto& r : set.referrals) {
      if (r.referral_id == referral_id) return &r;
    }
  }
  return nullptr;
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
     << ms.count() << 'Z';
  return os.str();
}

Json session_state_to_json(const SessionState& s) {
  Json versions = Json::array();
  for (const auto& v : s.versions) versions.push_back(Json{{"version", v.version}, {"boxes", v.boxes}});
  Json sets = Json::array();
  for (const auto& set : s.referral_sets) sets.push_back(referral_set_to_json(set));
  Json decisions = Json::array();
  for (const auto& d : s.decisions) decisions.push_back(decision_to_json(d));
  return Json{{"session_id", s.session_id},
              {"created_at", s.created_at},
              {"image",
               {{"image_id", s.image.image_id},
                {"format", s.image.format},
                {"reference", s.image.reference},
                {"original", s.image.original}}},
              {"versions", versions},
              {"referral_sets", sets},
              {"decisions", decisions},
              {"next_referral", s.next_referral}};
}

void apply_session_event(SessionState& s, const Json& ev) {
  const auto type = ev.at("type").get<std::string>();
  if (type == "created") {
    if (!s.session_id.empty()) invariant("duplicate creation event");
    s.session_id = ev.at("session_id").get<std::string>();
    s.created_at = ev.at("timestamp").get<std::string>();
    const auto& img = ev.at("image");
    s.image = {img.at("image_id").get<std::string>(), img.at("format").get<std::string>(),
               img.at("reference").get<std::string>(), img.at("original").get<ImageDims>()};
    s.versions.push_back({1, {}});
    return;
  }
  if (s.session_id.empty()) invariant("event before creation");

  if (type == "annotations") {
    const int version = ev.at("version").get<int>();
    if (version != s.versions.back().version + 1) invariant("non-sequential annotation version");
    s.versions.push_back({version, ev.at("boxes").get<std::vector<LabeledBox>>()});
  } else if (type == "recommendations") {
    IssuedReferralSet set;
    set.round = ev.at("round").get<int>();
    set.annotation_version = ev.at("annotation_version").get<int>();
    set.provider = ev.at("provider").get<std::string>();
    if (const auto& g = ev.at("gate"); !g.is_null()) set.gate = parse_gate_verdict(g.get<std::string>());
    for (const auto& r : ev.at("referrals")) {
      set.referrals.push_back({r.at("referral_id").get<std::string>(),
                               r.at("detection").get<Detection>(), ReferralStatus::kPending});
    }
    s.next_referral = ev.at("next_referral").get<int>();
    s.referral_sets.push_back(std::move(set));
  } else if (type == "decision") {
    Decision d;
    d.referral_id = ev.at("referral_id").get<std::string>();
    d.accepted = ev.at("decision").get<std::string>() == "accept";
    if (const auto& b = ev.at("box"); !b.is_null()) d.adjusted_box = b.get<BBox>();
    d.label = ev.at("label").get<std::string>();
    d.timestamp = ev.at("timestamp").get<std::string>();
    auto* ref = find_referral(s, d.referral_id);
    if (ref == nullptr) invariant("decision for unknown referral " + d.referral_id);
    if (ref->status != ReferralStatus::kPending) invariant("second decision for " + d.referral_id);
    ref->status = d.accepted ? ReferralStatus::kAccepted : ReferralStatus::kRejected;
    if (d.accepted) {
      auto next = s.versions.back();
      next.version += 1;
      next.boxes.push_back({d.adjusted_box.value_or(ref->detection.box), d.label});
      d.resulting_version = next.version;
      s.versions.push_back(std::move(next));
    }
    s.decisions.push_back(std::move(d));
  } else {
    invariant("unknown event type '" + type + "'");
  }
}

SessionState replay_session_log(const std::filesystem::path& log_path) {
  std::ifstream in(log_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open session log '" + log_path.string() + "'");
  SessionState state;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    apply_session_event(state, parse_json_text(line, log_path.string()));
  }
  if (state.session_id.empty()) invariant("empty log " + log_path.string());
  return state;
}

SessionStore::SessionStore(ServiceConfig config, std::shared_ptr<DetectionProvider> provider,
                           std::shared_ptr<NormalcyGate> gate, Clock clock)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      gate_(std::move(gate)),
      clock_(std::move(clock)) {
  std::filesystem::create_directories(config_.data_dir / "sessions");
  std::filesystem::create_directories(config_.data_dir / "images");
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(config_.data_dir / "sessions")) {
    if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) {
    auto slot = std::make_unique<Slot>();
    slot->state = replay_session_log(p);
    const auto& id = slot->state.session_id;
    if (id.size() > 1 && id[0] == 's') {
      next_session_ = std::max(next_session_, std::atoi(id.c_str() + 1) + 1);
    }
    sessions_.emplace(id, std::move(slot));
  }
}

std::filesystem::path SessionStore::log_path(const std::string& session_id) const {
  return config_.data_dir / "sessions" / (session_id + ".jsonl");
}

SessionStore::Slot& SessionStore::slot(const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kUnknownSession, "no session '" + session_id + "'");
  }
  return *it->second;
}

void SessionStore::append_event(const SessionState& state, const Json& event) {
  std::ofstream out(log_path(state.session_id), std::ios::app | std::ios::binary);
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "cannot append to log of " + state.session_id);
}

std::string SessionStore::register_session(SessionImage image) {
  std::lock_guard lock(sessions_mutex_);
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%06d", next_session_++);
  const std::string id = buf;
  if (image.image_id.empty()) image.image_id = id;
  if (image.reference.empty()) {
    image.reference = (config_.data_dir / "images" / (id + "." + image.format)).string();
  }

  auto slot = std::make_unique<Slot>();
  const Json event{{"type", "created"},
                   {"session_id", id},
                   {"timestamp", clock_()},
                   {"image",
                    {{"image_id", image.image_id},
                     {"format", image.format},
                     {"reference", image.reference},
                     {"original", image.original}}}};
  slot->state.session_id = id;
  append_event(slot->state, event);
  slot->state = {};
  apply_session_event(slot->state, event);
  sessions_.emplace(id, std::move(slot));
  return id;
}

std::string SessionStore::create_session(std::string_view payload, std::string_view content_type,
                                         ImageDims dims, std::string image_id) {
  std::string format;
  if (content_type == "image/png" && payload.substr(0, kPngMagic.size()) == kPngMagic) {
    format = "png";
  } else if ((content_type == "image/jpeg" || content_type == "image/jpg") &&
             payload.substr(0, kJpegMagic.size()) == kJpegMagic) {
    format = "jpeg";
  } else {
    throw Error(ErrorCode::kUnsupportedFormat,
                "payload must be PNG or JPEG with a matching content type");
  }
  if (!(dims.width > 0.0 && dims.height > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  const auto id = register_session({std::move(image_id), format, {}, dims});
  const auto reference = state(id).image.reference;
  write_file_atomic(reference, payload);
  return id;
}

std::string SessionStore::create_session_from_reference(const std::string& reference,
                                                        ImageDims dims, std::string image_id) {
  auto ext = std::filesystem::path(reference).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  std::string format;
  if (ext == ".png") format = "png";
  else if (ext == ".jpg" || ext == ".jpeg") format = "jpeg";
  else throw Error(ErrorCode::kUnsupportedFormat, "reference must name a .png or .jpg image");
  if (!(dims.width > 0.0 && dims.height > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  return register_session({std::move(image_id), format, reference, dims});
}

int SessionStore::put_annotations(const std::string& session_id, std::vector<LabeledBox> boxes,
                                  std::optional<int> base_version) {
  auto& sl = slot(session_id);
  std::unique_lock lock(sl.mutex, std::try_to_lock);
  if (!lock) throw Error(ErrorCode::kConflict, "session " + session_id + " is busy");
  for (const auto& b : boxes) {
    require_canonical(b.box);
    require_label(b.label);
  }
  const int latest = sl.state.versions.back().version;
  if (base_version && *base_version != latest) {
    throw Error(ErrorCode::kConflict, "annotations are at version " + std::to_string(latest) +
                                          ", not " + std::to_string(*base_version));
  }
  const Json event{{"type", "annotations"},
                   {"version", latest + 1},
                   {"boxes", boxes},
                   {"timestamp", clock_()}};
  append_event(sl.state, event);
  apply_session_event(sl.state, event);
  return latest + 1;
}

IssuedReferralSet SessionStore::get_recommendations(const std::string& session_id) {
  auto& sl = slot(session_id);
  std::unique_lock lock(sl.mutex, std::try_to_lock);
  if (!lock) throw Error(ErrorCode::kConflict, "session " + session_id + " is busy");
  auto& s = sl.state;
  const auto& latest = s.versions.back();
  const auto provider_name = provider_ ? provider_->describe() : std::string();

  if (!s.referral_sets.empty()) {
    const auto& last = s.referral_sets.back();
    if (last.annotation_version == latest.version && last.provider == provider_name) return last;
  }
  if (!provider_) throw Error(ErrorCode::kDetectorUnavailable, "no detector configured");

  const auto gate = gate_normalcy(s.image.image_id, gate_.get());
  std::vector<Detection> raw;
  if (gate.verdict != GateVerdict::kNormal) {
    try {
      raw = provider_->detect({s.image.image_id, s.image.reference});
    } catch (const Error& e) {
      throw Error(ErrorCode::kDetectorUnavailable,
                  std::string(e.code_name()) + ": " + e.what());
    }
  }
  std::vector<BBox> annotations;
  for (const auto& b : latest.boxes) annotations.push_back(b.box);
  const auto result = referral_pipeline(
      s.image.image_id, raw, annotations,
      gate_ ? std::optional<GateVerdict>(gate.verdict) : std::nullopt, config_.pipeline);

  int next = s.next_referral;
  Json refs = Json::array();
  for (const auto& d : result.referrals) {
    refs.push_back(Json{{"referral_id", "r" + std::to_string(next++)}, {"detection", d}});
  }
  const Json event{
      {"type", "recommendations"},
      {"round", static_cast<int>(s.referral_sets.size()) + 1},
      {"annotation_version", latest.version},
      {"provider", provider_name},
      {"gate", result.gate ? Json(gate_verdict_name(*result.gate)) : Json(nullptr)},
      {"referrals", refs},
      {"next_referral", next},
      {"timestamp", clock_()}};
  append_event(s, event);
  apply_session_event(s, event);
  auto issued = s.referral_sets.back();
  if (gate.warning) issued.warnings.push_back(*gate.warning);
  return issued;
}

SessionStore::DecisionResult SessionStore::decide(const std::string& session_id,
                                                  const std::string& referral_id, bool accept,
                                                  std::optional<BBox> adjusted_box,
                                                  std::optional<std::string> label) {
  auto& sl = slot(session_id);
  std::unique_lock lock(sl.mutex, std::try_to_lock);
  if (!lock) throw Error(ErrorCode::kConflict, "session " + session_id + " is busy");
  auto* ref = find_referral(sl.state, referral_id);
  if (ref == nullptr) {
    throw Error(ErrorCode::kUnknownReferral, "no referral '" + referral_id + "' in " + session_id);
  }
  if (ref->status != ReferralStatus::kPending) {
    throw Error(ErrorCode::kAlreadyDecided, "referral '" + referral_id + "' already decided");
  }
  if (adjusted_box) require_canonical(*adjusted_box);
  const std::string chosen =
      label.value_or(ref->detection.label.value_or(std::string(kAbnormalLabel)));
  require_label(chosen);

  const Json event{{"type", "decision"},
                   {"referral_id", referral_id},
                   {"decision", accept ? "accept" : "reject"},
                   {"box", adjusted_box ? Json(*adjusted_box) : Json(nullptr)},
                   {"label", chosen},
                   {"timestamp", clock_()}};
  append_event(sl.state, event);
  apply_session_event(sl.state, event);
  const auto& d = sl.state.decisions.back();
  return {d, d.resulting_version};
}

SessionState SessionStore::state(const std::string& session_id) const {
  auto& sl = slot(session_id);
  std::lock_guard lock(sl.mutex);
  return sl.state;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::lock_guard lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownReferral: return 404;
    case ErrorCode::kUnsupportedFormat: return 415;
    case ErrorCode::kAlreadyDecided:
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kDetectorUnavailable:
    case ErrorCode::kProviderTimeout: return 503;
    case ErrorCode::kIo:
    case ErrorCode::kInvariantViolation: return 500;
    default: return 400;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), Json{{"error", error_code_name(code)}, {"message", message}});
}

template <class F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::kMalformedInput, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::kInvariantViolation, e.what());
    }
  };
}

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return parse_json_text(req.body, "request body");
}

Json recommendations_json(const IssuedReferralSet& set) {
  auto j = referral_set_to_json(set);
  j["warnings"] = set.warnings;
  return j;
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
  server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const auto content_type = req.get_header_value("Content-Type");
    std::string id;
    if (content_type.rfind("application/json", 0) == 0) {
      const auto j = body_json(req);
      id = store.create_session_from_reference(
          j.at("image_reference").get<std::string>(),
          ImageDims{j.at("width").get<double>(), j.at("height").get<double>()},
          j.value("image_id", std::string()));
    } else {
      auto number = [&](const char* key) {
        if (!req.has_param(key)) {
          throw Error(ErrorCode::kInvalidArgument, std::string("missing query parameter ") + key);
        }
        try {
          return std::stod(req.get_param_value(key));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidArgument, std::string("bad query parameter ") + key);
        }
      };
      const auto semi = content_type.find(';');
      const auto mime = content_type.substr(0, semi);
      if (mime.rfind("image/", 0) != 0) {
        throw Error(ErrorCode::kUnsupportedFormat, "unsupported content type '" + mime + "'");
      }
      id = store.create_session(req.body, mime, ImageDims{number("width"), number("height")},
                                req.get_param_value("image_id"));
    }
    send_json(res, 200, Json{{"session_id", id}});
  }));

  server.Put(R"(/sessions/([^/]+)/annotations)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const auto j = body_json(req);
               auto boxes = parse_as<std::vector<LabeledBox>>(j.at("annotations"), "annotations");
               std::optional<int> base;
               if (j.contains("base_version")) base = j.at("base_version").get<int>();
               const int v = store.put_annotations(req.matches[1], std::move(boxes), base);
               send_json(res, 200, Json{{"version", v}});
             }));

  server.Post(R"(/sessions/([^/]+)/recommendations)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, recommendations_json(store.get_recommendations(req.matches[1])));
              }));

  server.Post(R"(/sessions/([^/]+)/referrals/([^/]+)/decision)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const auto j = body_json(req);
                const auto decision = j.at("decision").get<std::string>();
                if (decision != "accept" && decision != "reject") {
                  throw Error(ErrorCode::kInvalidArgument, "decision must be accept or reject");
                }
                std::optional<BBox> box;
                if (j.contains("box") && !j.at("box").is_null()) box = j.at("box").get<BBox>();
                std::optional<std::string> label;
                if (j.contains("label") && !j.at("label").is_null()) {
                  label = j.at("label").get<std::string>();
                }
                const auto out =
                    store.decide(req.matches[1], req.matches[2], decision == "accept", box, label);
                send_json(res, 200,
                          Json{{"decision", decision_to_json(out.decision)},
                               {"version", out.version ? Json(*out.version) : Json(nullptr)}});
              }));

  server.Get(R"(/sessions/([^/]+))",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, session_state_to_json(store.state(req.matches[1])));
             }));
}

std::unique_ptr<SessionStore> make_store_from_config(const std::filesystem::path& config_path) {
  const auto j = read_json_file(config_path);
  const auto base = config_path.parent_path();
  try {
    ServiceConfig config;
    std::filesystem::path data_dir(j.at("data_dir").get<std::string>());
    config.data_dir = data_dir.is_relative() ? base / data_dir : data_dir;
    const auto provider_cfg = provider_config_from_json(j.at("provider"), base);
    config.pipeline.confidence_floor = j.value("confidence_floor", provider_cfg.confidence_floor);
    std::shared_ptr<DetectionProvider> provider = make_provider(provider_cfg);
    std::shared_ptr<NormalcyGate> gate;
    if (j.contains("gate") && !j.at("gate").is_null()) gate = make_gate(j.at("gate"), base);
    return std::make_unique<SessionStore>(std::move(config), std::move(provider), std::move(gate));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, std::string("service config: ") + e.what());
  }
}

void run_server(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, store);
  if (!server.listen(host, port)) {
    throw Error(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

}  // namespace missref
