#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skillos {

/// Runs one command line (args[0] is the program name). JSON results go to
/// out. Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skillos
