#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace resshift {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitDiverged = 3,
};

/// Entry point of the `resshift` tool. `args` excludes the program name.
/// Subcommands: schedule, diffuse, train, sample, eval, gradcheck.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace resshift
