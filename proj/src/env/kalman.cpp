#include "aime/env/kalman.hpp"

#include <cmath>

#include "aime/common/errors.hpp"

namespace aime::env {

double kalman_log_evidence(const LinGaussParams& params, const Matrix& observations,
                           const Matrix& actions) {
  params.validate();
  const Eigen::Index n = params.a.rows();
  const Eigen::Index p = params.c.rows();
  const Eigen::Index horizon = observations.rows();
  if (actions.rows() != horizon) {
    throw ShapeError("kalman_log_evidence: need T actions for T observations");
  }
  if (observations.cols() != p) throw ShapeError("kalman_log_evidence: bad observation dim");
  if (actions.cols() != params.b.cols()) throw ShapeError("kalman_log_evidence: bad action dim");

  const Matrix q = params.q.asDiagonal();
  const Matrix rv = params.rv.asDiagonal();
  const double log2pi = std::log(2.0 * M_PI);

  Vector mean = params.m0;
  Matrix cov = params.p0.asDiagonal();
  double log_evidence = 0.0;

  for (Eigen::Index t = 0; t < horizon; ++t) {
    // Predict through a_t.
    mean = params.a * mean + params.b * actions.row(t).transpose();
    cov = params.a * cov * params.a.transpose() + q;
    cov = 0.5 * (cov + cov.transpose());

    // Innovation.
    const Vector innovation = observations.row(t).transpose() - params.c * mean;
    const Matrix s = params.c * cov * params.c.transpose() + rv;
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("kalman_log_evidence: innovation covariance not positive definite",
                           static_cast<long>(t));
    }
    const Matrix l = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) log_det += 2.0 * std::log(l(i, i));
    const Vector white = llt.matrixL().solve(innovation);
    log_evidence += -0.5 * (p * log2pi + log_det + white.squaredNorm());

    // Update.
    const Matrix gain = llt.solve(params.c * cov).transpose();
    mean += gain * innovation;
    cov = (Matrix::Identity(n, n) - gain * params.c) * cov;
    cov = 0.5 * (cov + cov.transpose());
  }
  if (!std::isfinite(log_evidence)) {
    throw NumericalError("kalman_log_evidence: non-finite result");
  }
  return log_evidence;
}

}  // namespace aime::env
