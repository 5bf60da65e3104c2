#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ace::cli {

/// Process exit codes.
enum ExitCode : int {
  ok = 0,
  bad_flags = 2,
  file_error = 3,
  numerical_error = 4,
  ill_conditioned_fit = 5,
};

/// Runs one command line (args[0] is the program name). Results go to files;
/// short summaries to `out`, warnings and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ace::cli
