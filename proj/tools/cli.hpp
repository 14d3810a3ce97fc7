#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kgr::cli {

// Exit codes: 0 success, 1 usage or validation failure, 2 non-finite loss
// abort, 3 gradient-check failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNonFinite = 2;
inline constexpr int kExitGradCheck = 3;

/// Runs one CLI invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgr::cli
