#pragma once

// Command-line front end: analyze | optimize | pareto | simulate | learn | validate.

#include <iosfwd>
#include <string>
#include <vector>

namespace asyncfl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

} // namespace asyncfl::cli
