#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zrpfluid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModelError = 2;
inline constexpr int kExitConsistency = 3;
inline constexpr int kExitThreshold = 4;

/// Runs `zrpfluid <args...>` (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zrpfluid::cli
