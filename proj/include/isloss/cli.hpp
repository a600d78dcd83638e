#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isloss {

/// Exit codes: 0 success, 1 runtime / I/O failure, 2 usage or validation error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name).
/// Subcommands: weights, oracle, train, eval. Global flags: --seed, --out-dir.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace isloss
