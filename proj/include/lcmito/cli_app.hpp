#pragma once

#include <string>
#include <vector>

namespace lcmito::cli {

// Runs the command-line front end. args excludes the program name.
// Returns the process exit code: 0 success, 1 validation error, 2 numerical
// failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace lcmito::cli
