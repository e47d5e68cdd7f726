#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nae::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

// Parses `args` (without the program name) and runs the selected subcommand.
// Diagnostics go to `err`, progress and results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nae::cli
