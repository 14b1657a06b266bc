#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ncps::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_condition_failed = 1,
    exit_validation = 2,
    exit_non_convergence = 3,
    exit_io = 4,
    exit_internal = 70,
};

/// Runs one subcommand. `args` excludes the program name. CSV goes to --out
/// (or output.path) when given, else to `out`; failures write a one-line JSON
/// record to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ncps::cli
