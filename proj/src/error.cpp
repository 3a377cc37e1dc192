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

#include "missref/error.hpp"

namespace missref {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidBox: return "invalid-box";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kInvalidThreshold: return "invalid-threshold";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kMissingColumn: return "missing-column";
    case ErrorCode::kUnparseableRow: return "unparseable-row";
    case ErrorCode::kUnknownImageDimensions: return "unknown-image-dimensions";
    case ErrorCode::kDegenerateAfterClamp: return "degenerate-after-clamp";
    case ErrorCode::kInsufficientNormals: return "insufficient-normals";
    case ErrorCode::kNoAbnormalCases: return "no-abnormal-cases";
    case ErrorCode::kUnsuppressedInput: return "unsuppressed-input";
    case ErrorCode::kProviderTimeout: return "provider-timeout";
    case ErrorCode::kSchemaViolation: return "schema-violation";
    case ErrorCode::kUnknownImage: return "unknown-image";
    case ErrorCode::kEmptyLedger: return "empty-ledger";
    case ErrorCode::kNoMatches: return "no-matches";
    case ErrorCode::kUnsupportedFormat: return "unsupported-format";
    case ErrorCode::kUnknownSession: return "unknown-session";
    case ErrorCode::kDetectorUnavailable: return "detector-unavailable";
    case ErrorCode::kUnknownReferral: return "unknown-referral";
    case ErrorCode::kAlreadyDecided: return "already-decided";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
  }
  return "unknown";
}

}  // namespace missref
