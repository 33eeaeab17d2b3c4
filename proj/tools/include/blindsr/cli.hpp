#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blindsr::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kUsageError = 2,
  kDiverged = 3,
};

/// Runs `blindsr <args...>` in-process. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace blindsr::cli
