#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace eqcon::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;  // worst statistic over all instances
  double limit = 0.0;  // pass threshold on `worst`
};

/// Closed-form versus Monte-Carlo, enumeration and finite-difference oracles
/// over random small instances.
std::vector<CheckResult> run_verify(const VerifyConfig& cfg);

}  // namespace eqcon::cli
