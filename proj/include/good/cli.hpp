#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace good {

// Process exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitVerifyFailed = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitDivergence = 4,
    kExitIncompatible = 5,
};

// Runs the command line `args` (without the program name) and returns the
// exit code. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace good
