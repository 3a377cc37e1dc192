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

#include <compare>
#include <optional>
#include <span>
#include <string>

namespace missref {

// Side length of the square coordinate frame all geometry is expressed in.
inline constexpr double kCanonicalFrame = 1024.0;

// Axis-aligned rectangle in continuous pixel coordinates. Construction
// rejects non-finite, negative, or zero-area boxes with ErrorCode::kInvalidBox,
// so every BBox value in the program has a strictly positive area.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }

  // Lexicographic over (x_min, y_min, x_max, y_max); used for tie-breaks.
  auto operator<=>(const BBox&) const = default;
  bool operator==(const BBox&) const = default;

  std::string to_string() const;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

// True when the four coordinates would form a valid BBox.
bool is_valid_box(double x_min, double y_min, double x_max, double y_max) noexcept;

double area(const BBox& b) noexcept;

// Overlap rectangle, or nullopt when the overlap has zero area. Boxes that
// only share an edge or a corner do not intersect.
std::optional<BBox> intersection(const BBox& a, const BBox& b) noexcept;

// Intersection over union in [0, 1]; exactly 0 when intersection() is empty.
double iou(const BBox& a, const BBox& b) noexcept;

// True when the interiors overlap, i.e. iou(a, b) > 0. Exact comparison.
bool overlaps(const BBox& a, const BBox& b) noexcept;

// Smallest box containing every input. Throws kEmptyInput on an empty span.
BBox hull(std::span<const BBox> boxes);

bool contains(const BBox& outer, const BBox& inner) noexcept;

// Multiplies x coordinates by sx and y coordinates by sy.
BBox scaled(const BBox& b, double sx, double sy);

}  // namespace missref
