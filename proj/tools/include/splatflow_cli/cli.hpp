// Copyright Contributors to the splatflow project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace splatflow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Runs `splatflow <args...>` (args excludes the program name) and returns
/// the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace splatflow::cli
