#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shm::cli {

/// Runs one command line (args excludes the program name). Returns the exit
/// code: 0 ok, 1 usage, 2 invalid input or data, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shm::cli
