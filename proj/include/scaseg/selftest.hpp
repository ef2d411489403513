#pragma once

#include <functional>
#include <string>
#include <vector>

namespace scaseg::selftest {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle equivalence, structural invariants, zero-init identity, gradient
/// checks and cost-model equality, each as one suite.
std::vector<SuiteResult> run_all();

}  // namespace scaseg::selftest
