#pragma once

#include <string>
#include <vector>

namespace mqud::cli {

/// Runs one `mqud` command line (args[0] is the program name) and returns the
/// process exit status: 0 ok, 2 config, 3 backend, 4 data.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace mqud::cli
