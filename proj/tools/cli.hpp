#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nemsfit::cli {

enum ExitCode : int {
    kOk = 0,
    kPartialFailure = 1,
    kInputError = 2,
    kNotConverged = 3,
};

/// Run the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nemsfit::cli
