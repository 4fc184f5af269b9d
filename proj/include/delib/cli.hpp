#pragma once

#include <ostream>

namespace delib {

// Entry point of the `delib` tool. Returns the process exit status
// (see ExitCode); diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace delib
