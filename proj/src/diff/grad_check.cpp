#include "aime/diff/grad_check.hpp"

#include <cmath>

namespace aime::diff {

namespace {
double eval(const ScalarFn& fn, const std::vector<Matrix>& point) {
  Tape tape;
  std::vector<Array> leaves;
  leaves.reserve(point.size());
  for (const Matrix& m : point) leaves.push_back(tape.constant(m));
  Array out = fn(tape, leaves);
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("grad_check: fn must return 1x1");
  const double v = out.value()(0, 0);
  if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite function value");
  return v;
}
}  // namespace

GradCheckResult grad_check(const ScalarFn& fn, const std::vector<Matrix>& point, double step) {
  if (step <= 0.0) throw DomainError("grad_check: step must be positive");

  // Analytic pass.
  Tape tape;
  std::vector<Array> leaves;
  leaves.reserve(point.size());
  for (const Matrix& m : point) leaves.push_back(tape.leaf(m));
  Array out = fn(tape, leaves);
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("grad_check: fn must return 1x1");
  tape.backward(out);

  std::vector<Matrix> analytic;
  analytic.reserve(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const Matrix& g = leaves[i].grad();
    analytic.push_back(g.size() == 0 ? Matrix::Zero(point[i].rows(), point[i].cols()) : g);
    if (!analytic.back().allFinite()) {
      throw NumericalError("grad_check: non-finite analytic gradient in input " +
                           std::to_string(i));
    }
  }

  GradCheckResult res;
  std::vector<Matrix> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    for (Eigen::Index r = 0; r < point[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < point[i].cols(); ++c) {
        const double x0 = point[i](r, c);
        probe[i](r, c) = x0 + step;
        const double fp = eval(fn, probe);
        probe[i](r, c) = x0 - step;
        const double fm = eval(fn, probe);
        probe[i](r, c) = x0;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[i](r, c);
        const double abs_err = std::abs(a - numeric);
        const double rel_err = abs_err / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (rel_err > res.max_rel_err) {
          res.max_rel_err = rel_err;
          res.max_abs_err = abs_err;
          res.input = static_cast<int>(i);
          res.row = r;
          res.col = c;
          res.analytic = a;
          res.numeric = numeric;
        }
      }
    }
  }
  return res;
}

}  // namespace aime::diff
