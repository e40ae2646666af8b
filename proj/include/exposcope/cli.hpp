#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exposcope {

// Runs one command line (without the program name). Returns 0 on success,
// 1 on a domain error and 2 on a configuration or usage error. Data goes to
// files or `out`; progress logs go to standard error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exposcope
