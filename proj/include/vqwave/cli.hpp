#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vqwave {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIncompatible = 2,
  kExitNumerical = 3,
};

/// Runs the command line `args` (without the program name). Normal output
/// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Text listing every configuration key with its default value.
std::string config_help();

}  // namespace vqwave
