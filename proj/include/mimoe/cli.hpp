#pragma once

#include <iosfwd>

namespace mimoe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Subcommands train, evaluate, featurize and route.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mimoe
