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

#include "missref/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "missref/error.hpp"

namespace missref {

bool is_valid_box(double x_min, double y_min, double x_max, double y_max) noexcept {
  for (double v : {x_min, y_min, x_max, y_max}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return x_min < x_max && y_min < y_max;
}

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!is_valid_box(x_min, y_min, x_max, y_max)) {
    std::ostringstream os;
    os << "invalid box (" << x_min << ", " << y_min << ", " << x_max << ", " << y_max
       << "): coordinates must be finite, non-negative, with min < max";
    throw Error(ErrorCode::kInvalidBox, os.str());
  }
}

std::string BBox::to_string() const {
  std::ostringstream os;
  os << '(' << x_min_ << ", " << y_min_ << ", " << x_max_ << ", " << y_max_ << ')';
  return os.str();
}

double area(const BBox& b) noexcept { return b.width() * b.height(); }

std::optional<BBox> intersection(const BBox& a, const BBox& b) noexcept {
  const double x0 = std::max(a.x_min(), b.x_min());
  const double y0 = std::max(a.y_min(), b.y_min());
  const double x1 = std::min(a.x_max(), b.x_max());
  const double y1 = std::min(a.y_max(), b.y_max());
  if (!(x0 < x1 && y0 < y1)) return std::nullopt;
  return BBox(x0, y0, x1, y1);
}

bool overlaps(const BBox& a, const BBox& b) noexcept {
  return std::max(a.x_min(), b.x_min()) < std::min(a.x_max(), b.x_max()) &&
         std::max(a.y_min(), b.y_min()) < std::min(a.y_max(), b.y_max());
}

double iou(const BBox& a, const BBox& b) noexcept {
  const auto inter = intersection(a, b);
  if (!inter) return 0.0;
  const double i = area(*inter);
  const double u = area(a) + area(b) - i;
  return std::clamp(i / u, 0.0, 1.0);
}

BBox hull(std::span<const BBox> boxes) {
  if (boxes.empty()) throw Error(ErrorCode::kEmptyInput, "hull of an empty box list");
  double x0 = boxes.front().x_min();
  double y0 = boxes.front().y_min();
  double x1 = boxes.front().x_max();
  double y1 = boxes.front().y_max();
  for (const auto& b : boxes.subspan(1)) {
    x0 = std::min(x0, b.x_min());
    y0 = std::min(y0, b.y_min());
    x1 = std::max(x1, b.x_max());
    y1 = std::max(y1, b.y_max());
  }
  return BBox(x0, y0, x1, y1);
}

bool contains(const BBox& outer, const BBox& inner) noexcept {
  return outer.x_min() <= inner.x_min() && outer.y_min() <= inner.y_min() &&
         outer.x_max() >= inner.x_max() && outer.y_max() >= inner.y_max();
}

BBox scaled(const BBox& b, double sx, double sy) {
  return BBox(b.x_min() * sx, b.y_min() * sy, b.x_max() * sx, b.y_max() * sy);
}

}  // namespace missref
