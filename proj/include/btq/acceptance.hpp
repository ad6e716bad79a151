#pragma once

#include <string>
#include <vector>

namespace btq::acceptance {

// One verification criterion of the full suite. `value` and `threshold` carry
// the headline measurement; `detail` lists every clause that fed the verdict.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=" or ">=" for the headline pair
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceReport {
  std::vector<CriterionResult> criteria;
  bool all_pass = false;
  double wall_total = 0.0;
};

// Runs the full verification suite (all sixteen criteria) with `jobs`
// concurrent level builds. Deterministic: numeric content of the result does
// not depend on jobs or on wall-clock conditions.
AcceptanceReport run_acceptance(int jobs = 1);

// One line per criterion plus a footer; suitable for terminal output.
std::string format_table(const AcceptanceReport& report);

}  // namespace btq::acceptance
