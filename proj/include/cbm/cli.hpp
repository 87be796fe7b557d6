#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbm {

inline constexpr const char* kToolVersion = "1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Runs the CLI with argv[0] omitted. Normal output goes to `out`, one-line
/// diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

}  // namespace cbm
