#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace confsteer::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kNumerical = 3 };

/// Runs one command line (without the program name). Errors are reported on
/// `err` and mapped to the exit-code contract.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int run(int argc, char **argv);

} // namespace confsteer::cli
