#pragma once

namespace rigidflow {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitNumerical = 3,
};

/// Entry point of the `dense_se3` tool. Subcommands: generate, solve, eval,
/// viz, selftest.
int run_cli(int argc, char** argv);

}  // namespace rigidflow
