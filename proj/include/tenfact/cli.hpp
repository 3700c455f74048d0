#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tenfact::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    /// Bad flags, unreadable or malformed input.
    kUsage = 1,
    /// The computation itself failed (singular systems, no usable data, ...).
    kNumerical = 2,
};

/// Runs the command line `args` (program name excluded). Normal output goes
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tenfact::cli
