#pragma once

namespace nested_eig {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitAllocation = 3,
  kExitEstimation = 4,
  kExitNoOracle = 5,
};

// Entry point of the nested-eig command line tool. Returns the process exit
// code; never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace nested_eig
