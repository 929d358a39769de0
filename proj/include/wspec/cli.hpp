#pragma once

#include <string>
#include <vector>

namespace wspec {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_check_failure = 1, exit_usage = 2, exit_no_convergence = 3 };

/// Runs the `wspec` command line (argv[0] is the program name). Subcommands:
/// mesh, solve, nodal, verify, sweep.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

const char* tool_version();

}  // namespace wspec
