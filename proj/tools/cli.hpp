#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace e2efs::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 1,
    kNotConverged = 2,
};

/// Runs the command line `args` (without the program name). Results go to files
/// under the output directory; summaries to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "E2EFS_OUTPUT_DIR";

} // namespace e2efs::cli
