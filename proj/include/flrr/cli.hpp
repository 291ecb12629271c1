#pragma once

#include <string>
#include <vector>

namespace flrr::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

/// Runs the tool on argv (argv[0] is the program name). Never throws.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace flrr::cli
