// cli.hpp
//
// Command-line entry point: segment | evaluate | parse | cache-proposals | synth.
// Exit codes: 0 success, 1 usage error, 2 data error.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hybridgl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridgl
