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

#include "missref/cli.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "missref/detector_gateway.hpp"
#include "missref/evaluation.hpp"
#include "missref/ingestion.hpp"
#include "missref/json_io.hpp"
#include "missref/service.hpp"
#include "missref/simulation.hpp"

namespace missref {
namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

std::vector<FusedCase> read_fused_cases(const std::string& path) {
  const auto j = read_json_file(path);
  if (!j.contains("cases")) throw Error(ErrorCode::kMalformedInput, path + ": no 'cases' array");
  return parse_as<std::vector<FusedCase>>(j.at("cases"), path);
}

// Ground truth boxes from either a fused-cases file or an error dataset.
BoxesByImage read_ground_truth(const std::string& path) {
  const auto j = read_json_file(path);
  if (j.contains("misses")) return ground_truth_boxes(parse_as<ErrorDataset>(j, path));
  BoxesByImage out;
  for (const auto& c : read_fused_cases(path)) {
    auto& boxes = out[c.image_id];
    for (const auto& a : c.annotations) boxes.push_back(a.box);
  }
  return out;
}

// Provider failures keep their own code when it is already a provider code,
// otherwise they are reported as detector-unavailable.
[[noreturn]] void rethrow_as_provider_error(const Error& e) {
  if (e.code() == ErrorCode::kProviderTimeout || e.code() == ErrorCode::kSchemaViolation ||
      e.code() == ErrorCode::kDetectorUnavailable) {
    throw e;
  }
  throw Error(ErrorCode::kDetectorUnavailable, std::string(e.code_name()) + ": " + e.what());
}

struct FuseArgs {
  std::string annotations, dims, out;
  double iou = kDefaultFusionThreshold;
};

void run_fuse(const FuseArgs& a) {
  auto dims_in = open_input(a.dims);
  const auto dims = read_dimensions(dims_in);
  auto table_in = open_input(a.annotations);
  const auto parsed = parse_annotations(table_in, dims);
  const auto fused = fuse_cases(parsed.cases, a.iou);
  const Json j{{"fusion_threshold", a.iou}, {"cases", fused}, {"rejects", parsed.rejects}};
  write_file_atomic(a.out, dump_canonical(j));
}

struct SimulateArgs {
  std::string fused, out;
  double fraction = kDefaultMissFraction;
  std::uint64_t seed = 0;
  std::size_t min_boxes = 1;
};

void run_simulate(const SimulateArgs& a) {
  const auto j = read_json_file(a.fused);
  SimulationConfig config;
  config.fraction = a.fraction;
  config.seed = a.seed;
  config.min_boxes_for_removal = a.min_boxes;
  config.fusion_threshold = j.value("fusion_threshold", kDefaultFusionThreshold);
  const auto ds = simulate_fused(read_fused_cases(a.fused), config);
  write_file_atomic(a.out, dump_canonical(Json(ds)));
}

struct ReferArgs {
  std::string error, provider, out;
  std::optional<double> conf_floor;
};

void run_refer(const ReferArgs& a) {
  const auto ds = parse_as<ErrorDataset>(read_json_file(a.error), a.error);
  const auto cfg_json = read_json_file(a.provider);
  const auto base = std::filesystem::path(a.provider).parent_path();
  const Json& provider_json = cfg_json.contains("provider") ? cfg_json.at("provider") : cfg_json;
  const auto provider_cfg = provider_config_from_json(provider_json, base);
  std::unique_ptr<NormalcyGate> gate;
  if (cfg_json.contains("gate") && !cfg_json.at("gate").is_null()) {
    gate = make_gate(cfg_json.at("gate"), base);
  }

  const auto truth = ground_truth_boxes(ds);
  std::unique_ptr<DetectionProvider> provider;
  try {
    provider = make_provider(provider_cfg, &truth);
  } catch (const Error& e) {
    if (provider_cfg.kind == ProviderKind::kRemoteEndpoint) rethrow_as_provider_error(e);
    throw;
  }

  PipelineConfig pipeline;
  pipeline.confidence_floor = a.conf_floor.value_or(provider_cfg.confidence_floor);

  Json sets = Json::array();
  std::vector<std::string> warnings;
  for (const auto& c : ds.cases) {
    std::optional<GateVerdict> verdict;
    if (gate) {
      auto g = gate_normalcy(c.image_id, gate.get());
      if (g.warning) warnings.push_back(*g.warning);
      verdict = g.verdict;
    }
    std::vector<Detection> raw;
    if (verdict != GateVerdict::kNormal) {
      try {
        raw = get_detections(c.image_id, *provider);
      } catch (const Error& e) {
        rethrow_as_provider_error(e);
      }
    }
    std::vector<BBox> annotations;
    for (const auto& f : c.annotations) annotations.push_back(f.box);
    sets.push_back(Json(referral_pipeline(c.image_id, raw, annotations, verdict, pipeline)));
  }
  const Json j{{"provider", provider->describe()},
               {"confidence_floor", pipeline.confidence_floor},
               {"referral_sets", sets},
               {"warnings", warnings}};
  write_file_atomic(a.out, dump_canonical(j));
}

struct EvalArgs {
  std::string referrals, error, out;
  double match_iou = kDefaultMatchThreshold;
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const auto ds = parse_as<ErrorDataset>(read_json_file(a.error), a.error);
  const auto rj = read_json_file(a.referrals);
  DetectionsByImage by_image;
  for (const auto& set : parse_as<std::vector<ReferralSet>>(rj.at("referral_sets"), a.referrals)) {
    auto& dets = by_image[set.image_id];
    dets.insert(dets.end(), set.referrals.begin(), set.referrals.end());
  }
  const auto ledger = classify_outcomes(by_image, ds, a.match_iou);
  const auto metrics = compute_metrics(ledger);
  Json stats = nullptr;
  if (!ledger.matches.empty()) stats = Json(iou_statistics(ledger));
  const Json j{{"match_threshold", a.match_iou},
               {"ledger", ledger},
               {"metrics", metrics},
               {"iou_statistics", stats}};
  write_file_atomic(a.out, dump_canonical(j));
  out << summary_table(ledger, metrics);
}

struct DetectorEvalArgs {
  std::string pred, gt, out;
  double iou = 0.5;
  double conf_floor = 0.0;
};

void run_detector_eval(const DetectorEvalArgs& a) {
  const auto predictions = [&] {
    const auto j = read_json_file(a.pred);
    try {
      return detections_by_image_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, a.pred + ": " + e.what());
    }
  }();
  const auto truth = read_ground_truth(a.gt);
  const auto m = evaluate_detector(predictions, truth, {a.iou, a.conf_floor});
  const Json j{{"iou_threshold", a.iou}, {"confidence_floor", a.conf_floor}, {"metrics", m}};
  write_file_atomic(a.out, dump_canonical(j));
}

struct SplitArgs {
  std::string cases, out;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a, std::ostream& err) {
  std::vector<CaseStatus> status;
  for (const auto& c : read_fused_cases(a.cases)) status.push_back({c.image_id, !c.abnormal});
  const auto manifest = balance_and_split(status, a.seed);
  for (const auto& w : manifest.warnings) err << Json{{"warning", w}}.dump() << '\n';
  write_file_atomic(a.out, dump_canonical(Json(manifest)));
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kProviderTimeout:
    case ErrorCode::kSchemaViolation:
    case ErrorCode::kDetectorUnavailable: return kExitProviderError;
    case ErrorCode::kInvariantViolation: return kExitInternalError;
    default: return kExitInputError;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perceptual-miss referral toolkit"};
  app.require_subcommand(1);

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Parse, rescale and fuse reader annotations");
  fuse_cmd->add_option("--annotations", fuse.annotations, "Annotation table (CSV)")->required();
  fuse_cmd->add_option("--dims", fuse.dims, "Image dimensions table (CSV)")->required();
  fuse_cmd->add_option("--out", fuse.out, "Fused cases (JSON)")->required();
  fuse_cmd->add_option("--iou", fuse.iou, "Fusion IoU threshold")->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Remove one fused box from a share of abnormal cases");
  sim_cmd->add_option("--fused", sim.fused, "Fused cases (JSON)")->required();
  sim_cmd->add_option("--fraction", sim.fraction, "Share of eligible cases to alter")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Run seed")->required();
  sim_cmd->add_option("--min-boxes", sim.min_boxes, "Minimum fused boxes for eligibility")
      ->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Error dataset (JSON)")->required();

  ReferArgs refer;
  auto* refer_cmd = app.add_subcommand("refer", "Compute referrals for every case");
  refer_cmd->add_option("--error", refer.error, "Error dataset (JSON)")->required();
  refer_cmd->add_option("--provider", refer.provider, "Provider config (JSON)")->required();
  refer_cmd->add_option("--out", refer.out, "Referral sets (JSON)")->required();
  refer_cmd->add_option("--conf-floor", refer.conf_floor, "Detector confidence floor");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score referrals against simulated misses");
  eval_cmd->add_option("--referrals", ev.referrals, "Referral sets (JSON)")->required();
  eval_cmd->add_option("--error", ev.error, "Error dataset (JSON)")->required();
  eval_cmd->add_option("--out", ev.out, "Report (JSON)")->required();
  eval_cmd->add_option("--match-iou", ev.match_iou, "A match needs IoU strictly above this")
      ->capture_default_str();

  DetectorEvalArgs de;
  auto* de_cmd = app.add_subcommand("detector-eval", "Precision, recall and mAP@0.5 of raw predictions");
  de_cmd->add_option("--pred", de.pred, "Predictions (JSON)")->required();
  de_cmd->add_option("--gt", de.gt, "Fused cases or error dataset (JSON)")->required();
  de_cmd->add_option("--out", de.out, "Metrics (JSON)")->required();
  de_cmd->add_option("--iou", de.iou, "Match IoU threshold")->capture_default_str();
  de_cmd->add_option("--conf-floor", de.conf_floor, "Confidence floor for precision/recall")
      ->capture_default_str();

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Balanced, seeded train/validation/test split");
  split_cmd->add_option("--cases", split.cases, "Fused cases (JSON)")->required();
  split_cmd->add_option("--seed", split.seed, "Run seed")->required();
  split_cmd->add_option("--out", split.out, "Split manifest (JSON)")->required();

  std::string serve_config;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the review HTTP service");
  serve_cmd->add_option("--config", serve_config, "Service config (JSON)")->required();
  serve_cmd->add_option("--port", port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << Json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return kExitInputError;
  }

  try {
    if (*fuse_cmd) run_fuse(fuse);
    else if (*sim_cmd) run_simulate(sim);
    else if (*refer_cmd) run_refer(refer);
    else if (*eval_cmd) run_eval(ev, out);
    else if (*de_cmd) run_detector_eval(de);
    else if (*split_cmd) run_split(split, err);
    else if (*serve_cmd) {
      auto store = make_store_from_config(serve_config);
      run_server(*store, host, port);
    }
  } catch (const Error& e) {
    err << Json{{"error", e.code_name()}, {"message", e.what()}}.dump() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << Json{{"error", "malformed-input"}, {"message", e.what()}}.dump() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << Json{{"error", "invariant-violation"}, {"message", e.what()}}.dump() << '\n';
    return kExitInternalError;
  }
  return kExitOk;
}

}  // namespace missref
