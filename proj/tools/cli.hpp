#pragma once

// Command-line front end: modal, frf, generate, train, crossval, evaluate,
// sweep and diagnose.

#include <iosfwd>
#include <string>
#include <vector>

namespace dtwin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitWarning = 4;

/// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtwin::cli
