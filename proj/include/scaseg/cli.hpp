#pragma once

#include <iosfwd>

namespace scaseg::cli {

// Stable exit codes.
inline constexpr int kOk = 0;
inline constexpr int kTestFailure = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kRuntimeError = 3;

/// Entry point for `scaseg <forward|gradcheck|flops|bench|selftest> ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scaseg::cli
