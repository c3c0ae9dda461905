#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvaug::cli {

// Exit statuses of the mvaug tool.
enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericFailure = 3,
};

// Runs one command line (args excludes the program name). Results go to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvaug::cli
