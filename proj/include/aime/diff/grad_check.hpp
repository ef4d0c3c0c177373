#pragma once

#include <functional>
#include <string>
#include <vector>

#include "aime/diff/tape.hpp"

namespace aime::diff {

/// A scalar-valued function of several matrix inputs, rebuilt on a fresh tape
/// per evaluation. The function must be deterministic (any noise is fixed in
/// the closure) and return a 1x1 Array.
using ScalarFn = std::function<Array(Tape&, const std::vector<Array>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  // location of the worst coordinate, for diagnostics
  int input = -1;
  Eigen::Index row = -1;
  Eigen::Index col = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the reverse-mode gradient of fn at `point` against central finite
/// differences with the given step. The relative error per coordinate is
/// |a - n| / max(1, |a|, |n|), so near-zero gradients are judged absolutely.
/// Non-finite values anywhere raise NumericalError.
GradCheckResult grad_check(const ScalarFn& fn, const std::vector<Matrix>& point, double step);

}  // namespace aime::diff
