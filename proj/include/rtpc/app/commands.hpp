#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rtpc::app {

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `rtpc` command line with `args` (program name excluded).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rtpc::app
