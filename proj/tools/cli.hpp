#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grwarm::cli {

/// Exit codes: 0 success, 1 usage or configuration error, 2 numeric or assertion failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grwarm::cli
