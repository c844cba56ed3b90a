#pragma once

#include <string>
#include <vector>

namespace shiftband::cli {

// Entry point shared by the binary and the tests. Returns the process
// exit code; errors are reported on stderr.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace shiftband::cli
