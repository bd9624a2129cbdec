#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace convkit::cli {

/// Runs the convkit command line (arguments without the program name).
/// Returns the process exit code: 0 success, 1 usage or I/O error,
/// 2 validation error, 3 numeric error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace convkit::cli
