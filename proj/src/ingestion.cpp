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

#include "missref/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <tuple>

#include <boost/tokenizer.hpp>

#include "missref/detection.hpp"
#include "missref/error.hpp"
#include "missref/rng.hpp"

namespace missref {
namespace {

using Row = std::vector<std::string>;

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

Row split_csv_line(const std::string& line) {
  using Separator = boost::escaped_list_separator<char>;
  // No escape character: VinDr tables quote with doubled quotes only.
  boost::tokenizer<Separator> tok(line, Separator("", ",", "\""));
  Row row;
  for (const auto& field : tok) row.push_back(trim(field));
  return row;
}

// Reads one line, stripping CR and a leading UTF-8 BOM on the first line.
bool next_line(std::istream& in, std::string& line, bool first) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  return true;
}

std::size_t column(const Row& header, std::initializer_list<std::string_view> names) {
  for (auto name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  throw Error(ErrorCode::kMissingColumn,
              "missing column '" + std::string(*names.begin()) + "'");
}

bool is_null_field(const std::string& s) {
  if (s.empty()) return true;
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "nan" || lower == "null" || lower == "none";
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::uint64_t priority(std::uint64_t seed, std::string_view stream, const std::string& id) {
  std::string key(stream);
  key += '/';
  key += id;
  return DeterministicRng::substream(seed, key).next_u64();
}

// Seeded permutation keyed by image id: each id gets an independent draw,
// ties resolved by the id itself.
std::vector<std::string> seeded_order(std::vector<std::string> ids, std::uint64_t seed,
                                      std::string_view stream) {
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(ids.size());
  for (auto& id : ids) keyed.emplace_back(priority(seed, stream, id), std::move(id));
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  out.reserve(keyed.size());
  for (auto& [p, id] : keyed) out.push_back(std::move(id));
  return out;
}

std::size_t round_count(double x) { return static_cast<std::size_t>(std::llround(x)); }

// Share of `total` that goes to a stratum of size `part` out of `whole`.
std::size_t stratum_share(std::size_t total, std::size_t part, std::size_t whole) {
  if (whole == 0) return 0;
  const auto share = round_count(static_cast<double>(total) * static_cast<double>(part) /
                                 static_cast<double>(whole));
  return std::min(share, part);
}

}  // namespace

DimensionsTable read_dimensions(std::istream& in) {
  std::string line;
  if (!next_line(in, line, true)) throw Error(ErrorCode::kMissingColumn, "empty dimensions table");
  const Row header = split_csv_line(line);
  const auto c_id = column(header, {"image_id"});
  const auto c_w = column(header, {"width", "original_width"});
  const auto c_h = column(header, {"height", "original_height"});
  const auto needed = std::max({c_id, c_w, c_h}) + 1;

  DimensionsTable dims;
  std::size_t line_no = 1;
  while (next_line(in, line, false)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const Row row = split_csv_line(line);
    std::optional<double> w, h;
    if (row.size() >= needed) {
      w = parse_number(row[c_w]);
      h = parse_number(row[c_h]);
    }
    if (!w || !h || *w <= 0.0 || *h <= 0.0 || row[c_id].empty()) {
      throw Error(ErrorCode::kUnparseableRow,
                  "dimensions table line " + std::to_string(line_no) + ": '" + line + "'");
    }
    dims[row[c_id]] = ImageDims{*w, *h};
  }
  return dims;
}

BBox clamp_and_rescale(double x_min, double y_min, double x_max, double y_max, ImageDims from,
                       ImageDims to) {
  if (!(from.width > 0.0 && from.height > 0.0 && to.width > 0.0 && to.height > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  const double x0 = std::clamp(x_min, 0.0, from.width);
  const double y0 = std::clamp(y_min, 0.0, from.height);
  const double x1 = std::clamp(x_max, 0.0, from.width);
  const double y1 = std::clamp(y_max, 0.0, from.height);
  if (!is_valid_box(x0, y0, x1, y1)) {
    throw Error(ErrorCode::kDegenerateAfterClamp, "box has no area after clamping to the frame");
  }
  const double sx = to.width / from.width;
  const double sy = to.height / from.height;
  const double rx0 = x0 * sx, ry0 = y0 * sy, rx1 = x1 * sx, ry1 = y1 * sy;
  if (!is_valid_box(rx0, ry0, rx1, ry1)) {
    throw Error(ErrorCode::kDegenerateAfterClamp, "box collapsed while rescaling");
  }
  return BBox(rx0, ry0, rx1, ry1);
}

BBox rescale(const BBox& box, ImageDims from, ImageDims to) {
  return clamp_and_rescale(box.x_min(), box.y_min(), box.x_max(), box.y_max(), from, to);
}

ParseResult parse_annotations(std::istream& table, const DimensionsTable& dims) {
  std::string line;
  if (!next_line(table, line, true)) throw Error(ErrorCode::kMissingColumn, "empty annotation table");
  const Row header = split_csv_line(line);
  const auto c_id = column(header, {"image_id"});
  const auto c_class = column(header, {"class_name"});
  const auto c_x0 = column(header, {"x_min"});
  const auto c_y0 = column(header, {"y_min"});
  const auto c_x1 = column(header, {"x_max"});
  const auto c_y1 = column(header, {"y_max"});
  const auto c_reader = column(header, {"rad_id", "reader_id"});
  const auto needed = std::max({c_id, c_class, c_x0, c_y0, c_x1, c_y1, c_reader}) + 1;

  std::map<std::string, CaseRecord, std::less<>> by_image;
  ParseResult result;
  std::size_t line_no = 1;
  while (next_line(table, line, false)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto reject = [&](std::string reason) {
      result.rejects.push_back({line_no, std::move(reason), line});
    };

    Row row;
    try {
      row = split_csv_line(line);
    } catch (const boost::escaped_list_error& e) {
      reject(std::string("malformed quoting: ") + e.what());
      continue;
    }
    if (row.size() < needed) {
      reject("expected at least " + std::to_string(needed) + " fields, got " +
             std::to_string(row.size()));
      continue;
    }
    const std::string& image_id = row[c_id];
    if (image_id.empty()) {
      reject("empty image_id");
      continue;
    }
    auto dim_it = dims.find(image_id);
    if (dim_it == dims.end()) {
      throw Error(ErrorCode::kUnknownImageDimensions,
                  "no dimensions recorded for image '" + image_id + "'");
    }
    auto& record = by_image[image_id];
    record.image_id = image_id;
    record.original = dim_it->second;

    const std::string& label = row[c_class];
    const std::array<const std::string*, 4> raw = {&row[c_x0], &row[c_y0], &row[c_x1], &row[c_y1]};
    const bool all_null = std::all_of(raw.begin(), raw.end(), [](auto* s) { return is_null_field(*s); });

    if (label == kNoFindingLabel) {
      if (!all_null) reject("'No finding' row carries coordinates");
      continue;
    }
    if (!is_known_label(label)) {
      reject("unknown class '" + label + "'");
      continue;
    }
    if (all_null) {
      reject("finding row without coordinates");
      continue;
    }
    std::array<double, 4> v{};
    bool numeric = true;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto n = parse_number(*raw[i]);
      if (!n) {
        numeric = false;
        break;
      }
      v[i] = *n;
    }
    if (!numeric) {
      reject("non-numeric coordinate");
      continue;
    }
    if (!(v[0] < v[2] && v[1] < v[3])) {
      reject("x_min >= x_max or y_min >= y_max");
      continue;
    }
    try {
      record.annotations.push_back(
          {clamp_and_rescale(v[0], v[1], v[2], v[3], dim_it->second), label, row[c_reader]});
    } catch (const Error& e) {
      reject(std::string(e.code_name()) + ": " + e.what());
    }
  }

  result.cases.reserve(by_image.size());
  for (auto& [id, record] : by_image) result.cases.push_back(std::move(record));
  return result;
}

SplitManifest balance_and_split(std::span<const CaseStatus> cases, std::uint64_t seed) {
  std::vector<std::string> abnormal, normal;
  for (const auto& c : cases) (c.is_normal ? normal : abnormal).push_back(c.image_id);
  if (abnormal.empty()) {
    throw Error(ErrorCode::kNoAbnormalCases, "balancing requires at least one abnormal case");
  }

  SplitManifest manifest;
  manifest.seed = seed;

  normal = seeded_order(std::move(normal), seed, "split/normal-sample");
  if (normal.size() < abnormal.size()) {
    manifest.warnings.push_back(std::string(error_code_name(ErrorCode::kInsufficientNormals)) +
                                ": " + std::to_string(normal.size()) +
                                " normal cases for " + std::to_string(abnormal.size()) +
                                " abnormal cases; using all normals");
  } else {
    normal.resize(abnormal.size());
  }
  abnormal = seeded_order(std::move(abnormal), seed, "split/order/abnormal");
  normal = seeded_order(std::move(normal), seed, "split/order/normal");

  const std::size_t total = abnormal.size() + normal.size();
  const std::size_t n_test = round_count(kTestFraction * static_cast<double>(total));
  const std::size_t n_val = round_count(kValidationFraction * static_cast<double>(total - n_test));

  const std::size_t test_a = std::min(stratum_share(n_test, abnormal.size(), total), n_test);
  const std::size_t test_n = std::min(n_test - test_a, normal.size());
  const std::size_t rest_a = abnormal.size() - test_a;
  const std::size_t rest_n = normal.size() - test_n;
  const std::size_t val_a = std::min(stratum_share(n_val, rest_a, rest_a + rest_n), n_val);
  const std::size_t val_n = std::min(n_val - val_a, rest_n);

  auto take = [](const std::vector<std::string>& src, std::size_t from, std::size_t count,
                 std::vector<std::string>& dst) {
    dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(from),
               src.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  take(abnormal, 0, test_a, manifest.test);
  take(normal, 0, test_n, manifest.test);
  take(abnormal, test_a, val_a, manifest.validation);
  take(normal, test_n, val_n, manifest.validation);
  take(abnormal, test_a + val_a, abnormal.size() - test_a - val_a, manifest.train);
  take(normal, test_n + val_n, normal.size() - test_n - val_n, manifest.train);

  for (auto* list : {&manifest.train, &manifest.validation, &manifest.test}) {
    std::sort(list->begin(), list->end());
  }
  return manifest;
}

SplitManifest balance_and_split(std::span<const CaseRecord> cases, std::uint64_t seed) {
  std::vector<CaseStatus> status;
  status.reserve(cases.size());
  for (const auto& c : cases) status.push_back({c.image_id, c.is_normal()});
  return balance_and_split(status, seed);
}

}  // namespace missref
