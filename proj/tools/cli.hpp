// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROC_TOOLS_CLI_HPP
#define GROC_TOOLS_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace groc::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericFailure = 3;

/// Environment variable naming the directory searched for relative input
/// paths that do not exist under the working directory.
inline constexpr const char* kDataDirEnv = "GROC_DATA_DIR";

/// Runs one command line (args[0] is the program name). Reports go to
/// `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, used for config and artifact fingerprints in manifests.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Resolves an input path against the working directory, then kDataDirEnv.
std::filesystem::path resolve_input(const std::string& path);

}  // namespace groc::cli

#endif  // GROC_TOOLS_CLI_HPP
