#pragma once

#include <iosfwd>

namespace tportal::cli {

/// Entry point of the `tportal` command. Returns the process exit status:
/// 0 on success, 1 on a library error (reported as JSON on `err`), and the
/// argument parser's status on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tportal::cli
