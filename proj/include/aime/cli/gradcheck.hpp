#pragma once

#include <string>
#include <vector>

namespace aime::cli {

struct GradCheckCase {
  std::string name;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  bool passed = false;
};

/// Runs every registered reverse-mode-vs-central-difference check at its
/// documented tolerance: the elementwise blocks at 1e-6, composite model
/// paths at 1e-4 (1e-5 for the chained recurrent steps), including the
/// gradient of the phase-2 objective with respect to policy parameters
/// through sampled actions. Deterministic; returns one row per check.
std::vector<GradCheckCase> gradcheck_suite();

/// Prints the table and returns true when every case passed.
bool report_gradcheck(const std::vector<GradCheckCase>& cases);

}  // namespace aime::cli
