#pragma once
// Command-line front end. `run_cli` is the whole program minus process
// plumbing, so tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

#include "sortition/error.hpp"

namespace sortition::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kBadPool = 3,
  kQuotaInfeasible = 4,
  kNumericalFailure = 5,
};

int exit_code_for(ErrorKind kind);

/// `args` excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace sortition::cli
