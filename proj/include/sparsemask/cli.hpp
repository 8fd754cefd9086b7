// Copyright 2026 The sparsemask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `sparsemask` command line. Exit codes: 0 success, 1 validation error
// (bad flags, bad input files, invalid configurations), 2 runtime or
// numerical failure (including a failed gradient or verification check).
// SPARSEMASK_SEED, when set to an unsigned integer, replaces the default of
// every --seed flag.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sparsemask {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kSeedEnvVar = "SPARSEMASK_SEED";

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparsemask
