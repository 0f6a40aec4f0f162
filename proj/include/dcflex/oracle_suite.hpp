#pragma once

#include <string>
#include <vector>

namespace dcflex {

struct OracleCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // largest observed gap, comparable to the tolerance
  std::string detail;
};

/// Deterministic self-checks of the analytic results against independent
/// references: the closed-form curtailment split against the enumerating QP
/// solver, the flexibility arithmetic against hand-computed values from the
/// bundled survey, and the utility-weight tuner's sum identity.
std::vector<OracleCheck> run_oracle_suite();

bool all_passed(const std::vector<OracleCheck>& checks);

}  // namespace dcflex
