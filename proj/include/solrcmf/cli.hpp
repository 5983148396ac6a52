#pragma once

#include <string>
#include <vector>

namespace solrcmf {

/// Runs the command-line driver on the given arguments (excluding the
/// program name). Returns the process exit code: 0 on success, 2 on
/// configuration errors, 3 on numeric failures.
int run_cli(const std::vector<std::string>& args);

}  // namespace solrcmf
