#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace pmpthermo::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kInfeasible = 3,
  kSolverFailure = 4,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Invariant suite behind `verify`. Each check runs in reduced units.
std::vector<CheckOutcome> run_invariant_suite();

}  // namespace pmpthermo::cli
