#pragma once

#include <string>
#include <vector>

namespace cde::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kDataError = 3;
inline constexpr int kNonConvergence = 4;
inline constexpr int kInternal = 5;

/// Entry point of the `cde` tool: simulate, fit, density, replicate, summarize.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace cde::cli
