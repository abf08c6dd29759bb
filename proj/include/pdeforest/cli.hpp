#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdeforest::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kBudgetExhausted = 2,
    kIoError = 3,
};

/// Runs one command line. `args` excludes the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int main(int argc, char **argv);

} // namespace pdeforest::cli
