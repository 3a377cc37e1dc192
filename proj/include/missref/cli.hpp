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

#include <iosfwd>
#include <string>
#include <vector>

#include "missref/error.hpp"

namespace missref {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitProviderError = 3,
  kExitInternalError = 4,
};

int exit_code_for(ErrorCode code);

// Batch entry point: fuse, simulate, refer, eval, detector-eval, split,
// serve. Errors are written to `err` as one JSON object; outputs are only
// written when the whole subcommand succeeds.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace missref
