#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace seirhcd {

inline constexpr const char* kToolVersion = "0.1.0";

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitEmptySpace = 4,
};

/// Runs one command line (args[0] is the program name) and returns the exit code.
/// Subcommands: simulate, sensitivity, emulate, synth, invert.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace seirhcd
