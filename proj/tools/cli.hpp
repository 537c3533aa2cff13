#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evfuse::cli {

/// Exit codes of `run`.
enum ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kNumerical = 3,
};

/// Runs one subcommand. `args` excludes the program name. The JSON summary
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evfuse::cli
