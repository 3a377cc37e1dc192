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

#include <span>
#include <vector>

#include "missref/detection.hpp"

namespace missref {

// Greedy non-maximum suppression at a zero-overlap threshold: walk the
// detections in ranks_before() order, keep a box unless it overlaps
// (IoU > 0) a box already kept. The result is in ranked order and no two
// retained boxes overlap.
std::vector<Detection> suppress_zero_overlap(std::span<const Detection> detections);

// True when no pair of detections overlaps, i.e. suppression would be a no-op.
bool is_zero_overlap(std::span<const Detection> detections) noexcept;

}  // namespace missref
