#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace uvqa::cli {

/// Runs one subcommand. Returns the process exit code: 0 on success, 1 for a
/// runtime failure, 2 for a usage error. Failures print a single line
/// "error[<kind>]: <message>" to err.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uvqa::cli
