#pragma once

#include <iosfwd>

namespace transmamba::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitGradcheck = 3;

/// Runs one subcommand (gen-data, train, derain, eval, gradcheck, band-swap,
/// describe) and returns the process exit code.
int main(int argc, const char* const* argv);
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace transmamba::cli
