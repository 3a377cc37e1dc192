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

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <thread>

#include "missref/error.hpp"
#include "missref/service.hpp"

namespace missref {
namespace {

namespace fs = std::filesystem;

const std::string kPng = std::string("\x89PNG\r\n\x1a\n", 8) + "rest-of-image";
const std::string kJpeg = std::string("\xFF\xD8\xFF\xE0", 4) + "jfif";

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvariantViolation;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("missref_" + name + "_" + std::to_string(std::random_device{}()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Clock counting_clock() {
  auto n = std::make_shared<int>(0);
  return [n] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2026-01-01T00:00:%02d.000Z", (*n)++ % 60);
    return std::string(buf);
  };
}

Detection det(double x0, double y0, double x1, double y1, double c) {
  return Detection(BBox(x0, y0, x1, y1), c, std::string("abnormal"));
}

std::shared_ptr<DetectionProvider> two_box_provider() {
  DetectionsByImage m;
  m["img1"] = {det(100, 100, 200, 200, 0.9), det(600, 600, 700, 680, 0.6)};
  return std::make_shared<StaticManifestProvider>(m);
}

class ThrowingProvider final : public DetectionProvider {
 public:
  std::vector<Detection> detect(const DetectionRequest&) override {
    throw Error(ErrorCode::kProviderTimeout, "too slow");
  }
  std::string describe() const override { return "throwing"; }
};

class BlockingProvider final : public DetectionProvider {
 public:
  std::promise<void> entered;
  std::shared_future<void> release;
  std::vector<Detection> detect(const DetectionRequest&) override {
    entered.set_value();
    release.wait();
    return {};
  }
  std::string describe() const override { return "blocking"; }
};

TEST(Service, CreateSession) {
  const auto dir = fresh_dir("create");
  SessionStore store({dir, {}}, two_box_provider(), nullptr, counting_clock());
  const auto a = store.create_session(kPng, "image/png", {2048, 2048}, "img1");
  const auto b = store.create_session(kPng, "image/png", {2048, 2048}, "img1");
  EXPECT_NE(a, b);
  EXPECT_TRUE(fs::exists(store.state(a).image.reference));
  EXPECT_EQ(store.state(a).image.format, "png");
  const auto j = store.create_session(kJpeg, "image/jpeg", {100, 100}, "imgj");
  EXPECT_EQ(store.state(j).image.format, "jpeg");
  EXPECT_EQ(code_of([&] { store.create_session("GIF89a", "image/gif", {10, 10}); }),
            ErrorCode::kUnsupportedFormat);
  EXPECT_EQ(code_of([&] { store.create_session(kJpeg, "image/png", {10, 10}); }),
            ErrorCode::kUnsupportedFormat);
  EXPECT_EQ(code_of([&] { store.create_session_from_reference("scan.tiff", {10, 10}); }),
            ErrorCode::kUnsupportedFormat);
  EXPECT_EQ(code_of([&] { store.state("s999999"); }), ErrorCode::kUnknownSession);
  fs::remove_all(dir);
}

TEST(Service, AnnotationVersions) {
  const auto dir = fresh_dir("annotate");
  SessionStore store({dir, {}}, two_box_provider(), nullptr, counting_clock());
  const auto s = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
  EXPECT_EQ(store.state(s).versions.size(), 1u);
  const int v2 = store.put_annotations(
      s, {{BBox(1, 1, 10, 10), "ILD"}, {BBox(20, 20, 30, 30), "Nodule/Mass"}});
  EXPECT_EQ(v2, 2);
  EXPECT_EQ(store.put_annotations(s, {}), 3);
  EXPECT_TRUE(store.state(s).versions.back().boxes.empty());
  EXPECT_EQ(code_of([&] { store.put_annotations(s, {{BBox(1, 1, 2000, 10), "ILD"}}); }),
            ErrorCode::kInvalidBox);
  EXPECT_EQ(code_of([&] { store.put_annotations(s, {{BBox(1, 1, 20, 10), "Broken"}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { store.put_annotations(s, {}, 2); }), ErrorCode::kConflict);
  EXPECT_EQ(store.state(s).versions.size(), 3u);
  EXPECT_EQ(store.put_annotations(s, {}, 3), 4);
  fs::remove_all(dir);
}

TEST(Service, RecommendationsExamples) {
  const auto dir = fresh_dir("recommend");
  SessionStore store({dir, {0.25}}, two_box_provider(), nullptr, counting_clock());
  const auto s = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
  const auto empty_ann = store.get_recommendations(s);
  EXPECT_EQ(empty_ann.referrals.size(), 2u);
  EXPECT_EQ(empty_ann.referrals[0].referral_id, "r1");
  EXPECT_EQ(empty_ann.referrals[1].referral_id, "r2");
  // Unchanged annotations: same set, no new round.
  const auto again = store.get_recommendations(s);
  EXPECT_EQ(again.round, empty_ann.round);
  EXPECT_EQ(store.state(s).referral_sets.size(), 1u);

  store.put_annotations(s, {{BBox(150, 150, 160, 160), "ILD"}, {BBox(650, 650, 660, 660), "ILD"}});
  const auto covered = store.get_recommendations(s);
  EXPECT_TRUE(covered.referrals.empty());
  EXPECT_EQ(covered.round, 2);

  SessionStore broken({fresh_dir("recommend_fail"), {}}, std::make_shared<ThrowingProvider>());
  const auto t = broken.create_session(kPng, "image/png", {1024, 1024}, "img1");
  EXPECT_EQ(code_of([&] { broken.get_recommendations(t); }), ErrorCode::kDetectorUnavailable);
  fs::remove_all(dir);
}

TEST(Service, GateNormalSuppressesAndUnavailableWarns) {
  const auto dir = fresh_dir("gate");
  auto gate = std::make_shared<StaticNormalcyGate>(
      std::map<std::string, GateVerdict, std::less<>>{{"img1", GateVerdict::kNormal}});
  DetectionsByImage m;
  m["img1"] = {det(1, 1, 5, 5, 0.9)};
  m["img2"] = {det(1, 1, 5, 5, 0.9)};
  SessionStore store({dir, {}}, std::make_shared<StaticManifestProvider>(m), gate, counting_clock());
  const auto a = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
  const auto b = store.create_session(kPng, "image/png", {1024, 1024}, "img2");
  const auto ra = store.get_recommendations(a);
  EXPECT_TRUE(ra.referrals.empty());
  EXPECT_EQ(ra.gate, GateVerdict::kNormal);
  const auto rb = store.get_recommendations(b);
  EXPECT_EQ(rb.referrals.size(), 1u);
  EXPECT_EQ(rb.gate, GateVerdict::kUnavailable);
  EXPECT_EQ(rb.warnings.size(), 1u);
  fs::remove_all(dir);
}

TEST(Service, DecisionsAndReplay) {
  const auto dir = fresh_dir("decide");
  std::string session;
  std::string before_restart;
  {
    SessionStore store({dir, {0.25}}, two_box_provider(), nullptr, counting_clock());
    session = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
    store.put_annotations(session, {{BBox(10, 10, 20, 20), "ILD"}});
    const auto recs = store.get_recommendations(session);
    ASSERT_EQ(recs.referrals.size(), 2u);

    const auto acc = store.decide(session, "r1", true, BBox(95, 95, 205, 210), "Nodule/Mass");
    ASSERT_TRUE(acc.version);
    EXPECT_EQ(*acc.version, 3);
    const auto latest = store.state(session).versions.back();
    ASSERT_EQ(latest.boxes.size(), 2u);
    EXPECT_NE(std::find(latest.boxes.begin(), latest.boxes.end(),
                        LabeledBox{BBox(95, 95, 205, 210), "Nodule/Mass"}),
              latest.boxes.end());
    // The issued referral keeps its original box.
    EXPECT_EQ(store.state(session).referral_sets[0].referrals[0].detection.box,
              BBox(100, 100, 200, 200));

    const auto rej = store.decide(session, "r2", false);
    EXPECT_FALSE(rej.version);
    EXPECT_EQ(store.state(session).versions.size(), 3u);
    EXPECT_EQ(code_of([&] { store.decide(session, "r2", true); }), ErrorCode::kAlreadyDecided);
    EXPECT_EQ(code_of([&] { store.decide(session, "r77", true); }), ErrorCode::kUnknownReferral);

    before_restart = dump_canonical(session_state_to_json(store.state(session)));
    EXPECT_EQ(dump_canonical(session_state_to_json(replay_session_log(store.log_path(session)))),
              before_restart);
  }
  // A new store over the same directory rebuilds the same state and keeps
  // numbering sessions and referrals from where it left off.
  SessionStore reopened({dir, {0.25}}, two_box_provider(), nullptr, counting_clock());
  EXPECT_EQ(dump_canonical(session_state_to_json(reopened.state(session))), before_restart);
  const auto next = reopened.create_session(kPng, "image/png", {1024, 1024}, "img1");
  EXPECT_NE(next, session);
  reopened.put_annotations(session, {});
  const auto r = reopened.get_recommendations(session);
  ASSERT_FALSE(r.referrals.empty());
  EXPECT_EQ(r.referrals[0].referral_id, "r3");
  fs::remove_all(dir);
}

TEST(Service, AcceptWithoutAdjustmentUsesReferralBox) {
  const auto dir = fresh_dir("accept_plain");
  SessionStore store({dir, {}}, two_box_provider(), nullptr, counting_clock());
  const auto s = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
  store.get_recommendations(s);
  store.decide(s, "r2", true);
  const auto latest = store.state(s).versions.back();
  ASSERT_EQ(latest.boxes.size(), 1u);
  EXPECT_EQ(latest.boxes[0].box, BBox(600, 600, 700, 680));
  EXPECT_EQ(latest.boxes[0].label, "abnormal");
  fs::remove_all(dir);
}

TEST(Service, ConcurrentWriteConflicts) {
  const auto dir = fresh_dir("conflict");
  auto provider = std::make_shared<BlockingProvider>();
  std::promise<void> release;
  provider->release = release.get_future().share();
  SessionStore store({dir, {}}, provider, nullptr, counting_clock());
  const auto s = store.create_session(kPng, "image/png", {1024, 1024}, "img1");
  auto entered = provider->entered.get_future();
  auto worker = std::async(std::launch::async, [&] { return store.get_recommendations(s); });
  entered.wait();
  EXPECT_EQ(code_of([&] { store.put_annotations(s, {}); }), ErrorCode::kConflict);
  release.set_value();
  EXPECT_NO_THROW(worker.get());
  EXPECT_EQ(store.put_annotations(s, {}), 2);
  fs::remove_all(dir);
}

TEST(Service, HttpApi) {
  const auto dir = fresh_dir("http");
  SessionStore store({dir, {0.25}}, two_box_provider(), nullptr, counting_clock());
  httplib::Server server;
  register_routes(server, store);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client c("127.0.0.1", port);

  auto created = c.Post("/sessions?width=1024&height=1024&image_id=img1", kPng, "image/png");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 200) << created->body;
  const auto sid = Json::parse(created->body).at("session_id").get<std::string>();

  auto bad = c.Post("/sessions?width=10&height=10", "GIF89a", "image/gif");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 415);
  EXPECT_EQ(Json::parse(bad->body).at("error"), "unsupported-format");
  auto text = c.Post("/sessions?width=10&height=10", "hello", "text/plain");
  EXPECT_EQ(text->status, 415);

  auto ref = c.Post("/sessions",
                    Json{{"image_reference", "/scans/img1.png"}, {"width", 2000}, {"height", 2000},
                         {"image_id", "img1"}}.dump(),
                    "application/json");
  EXPECT_EQ(ref->status, 200) << ref->body;

  const Json ann{{"annotations",
                  {{{"box", {{"x_min", 10}, {"y_min", 10}, {"x_max", 20}, {"y_max", 20}}},
                    {"label", "ILD"}}}}};
  auto put = c.Put("/sessions/" + sid + "/annotations", ann.dump(), "application/json");
  ASSERT_EQ(put->status, 200) << put->body;
  EXPECT_EQ(Json::parse(put->body).at("version"), 2);

  const Json inverted{{"annotations",
                       {{{"box", {{"x_min", 30}, {"y_min", 10}, {"x_max", 20}, {"y_max", 20}}},
                         {"label", "ILD"}}}}};
  auto rejected = c.Put("/sessions/" + sid + "/annotations", inverted.dump(), "application/json");
  EXPECT_EQ(rejected->status, 400);
  EXPECT_EQ(Json::parse(rejected->body).at("error"), "invalid-box");

  auto stale = c.Put("/sessions/" + sid + "/annotations",
                     Json{{"annotations", Json::array()}, {"base_version", 1}}.dump(),
                     "application/json");
  EXPECT_EQ(stale->status, 409);

  auto recs = c.Post("/sessions/" + sid + "/recommendations", "", "application/json");
  ASSERT_EQ(recs->status, 200) << recs->body;
  const auto rj = Json::parse(recs->body);
  ASSERT_EQ(rj.at("referrals").size(), 2u);
  EXPECT_EQ(rj.at("referrals")[0].at("referral_id"), "r1");

  auto acc = c.Post("/sessions/" + sid + "/referrals/r1/decision",
                    Json{{"decision", "accept"}}.dump(), "application/json");
  ASSERT_EQ(acc->status, 200) << acc->body;
  EXPECT_EQ(Json::parse(acc->body).at("version"), 3);
  auto twice = c.Post("/sessions/" + sid + "/referrals/r1/decision",
                      Json{{"decision", "reject"}}.dump(), "application/json");
  EXPECT_EQ(twice->status, 409);
  auto nope = c.Post("/sessions/" + sid + "/referrals/r9/decision",
                     Json{{"decision", "reject"}}.dump(), "application/json");
  EXPECT_EQ(nope->status, 404);
  auto garbage = c.Post("/sessions/" + sid + "/referrals/r2/decision", "{", "application/json");
  EXPECT_EQ(garbage->status, 400);

  auto got = c.Get("/sessions/" + sid);
  ASSERT_EQ(got->status, 200);
  EXPECT_EQ(Json::parse(got->body), session_state_to_json(store.state(sid)));
  auto missing = c.Get("/sessions/s424242");
  EXPECT_EQ(missing->status, 404);

  server.stop();
  th.join();
  fs::remove_all(dir);
}

TEST(Service, ConfigFile) {
  const auto dir = fresh_dir("config");
  {
    std::ofstream(dir / "manifest.json")
        << R"({"images": [{"image_id": "img1", "detections": [
             {"x_min": 1, "y_min": 1, "x_max": 9, "y_max": 9, "confidence": 0.8}]}]})";
    std::ofstream(dir / "service.json")
        << R"({"data_dir": "state", "confidence_floor": 0.5,
              "provider": {"kind": "static-manifest", "manifest": "manifest.json"},
              "gate": {"kind": "static-table", "verdicts": {"img1": "abnormal"}}})";
  }
  auto store = make_store_from_config(dir / "service.json");
  const auto s = store->create_session(kPng, "image/png", {1024, 1024}, "img1");
  EXPECT_TRUE(fs::exists(dir / "state" / "sessions"));
  EXPECT_EQ(store->get_recommendations(s).referrals.size(), 1u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace missref
