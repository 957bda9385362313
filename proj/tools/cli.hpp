#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attrib::cli {

/// Runs one attrib-eval subcommand. `args` excludes the program name.
/// Returns the process exit status.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attrib::cli
