#pragma once

#include "aime/env/lingauss.hpp"

namespace aime::env {

/// Exact log p(o_1..o_T | a_0..a_{T-1}) for a linear-Gaussian system via the
/// Kalman filter prediction-error decomposition. Rows of `observations` are
/// o_1..o_T; rows of `actions` are a_0..a_{T-1}, with a_t driving the
/// transition into the state emitting o_{t+1}. Throws NumericalError with the
/// failing step when an innovation covariance stops being positive definite.
double kalman_log_evidence(const LinGaussParams& params, const Matrix& observations,
                           const Matrix& actions);

}  // namespace aime::env
