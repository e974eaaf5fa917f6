#pragma once

#include <iosfwd>

namespace coordseg::cli {

/// Process exit codes. Scripts rely on these values.
enum ExitCode : int {
  kOk = 0,
  kRuntimeFailure = 1,
  kConfigError = 2,
  kParseNotFound = 3,
};

/// Runs the coordseg command line. Output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coordseg::cli
