#pragma once

namespace flipchance::app {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kInfeasible = 3, kIo = 4 };

/// Entry point of the `flipchance` command line tool.
int run(int argc, char** argv);

}  // namespace flipchance::app
