#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spancl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Subcommands: synth, augment, train, predict, evaluate, sweep-tau.
/// Returns 0 on success, 2 on a usage error, 1 on any other failure.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spancl
