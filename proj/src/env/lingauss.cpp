#include "aime/env/lingauss.hpp"

#include <cmath>

#include "aime/common/errors.hpp"

namespace aime::env {

void LinGaussParams::validate() const {
  const auto n = a.rows();
  if (a.cols() != n) throw ShapeError("lingauss: A must be square");
  if (b.rows() != n) throw ShapeError("lingauss: B rows must match state dim");
  if (c.cols() != n) throw ShapeError("lingauss: C cols must match state dim");
  if (q.size() != n || m0.size() != n || p0.size() != n) {
    throw ShapeError("lingauss: q/m0/p0 must match state dim");
  }
  if (rv.size() != c.rows()) throw ShapeError("lingauss: rv must match obs dim");
  if (q.minCoeff() < 0.0 || rv.minCoeff() < 0.0 || p0.minCoeff() < 0.0) {
    throw DomainError("lingauss: noise variances must be non-negative");
  }
  const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 1.05) {
    throw DomainError("lingauss: spectral radius " + std::to_string(rho) + " exceeds 1.05");
  }
}

LinGaussConfig default_lingauss(bool noiseless) {
  const double theta = 0.4;
  Matrix a(2, 2);
  a << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  a *= 0.9;
  LinGaussParams p;
  p.a = a;
  p.b = 0.4 * Matrix::Identity(2, 2);
  p.c = Matrix::Identity(2, 2);
  p.q = Vector::Constant(2, noiseless ? 0.0 : 0.02 * 0.02);
  p.rv = Vector::Constant(2, noiseless ? 0.0 : 0.05 * 0.05);
  p.m0 = Vector::Zero(2);
  p.p0 = Vector::Constant(2, 0.3 * 0.3);
  LinGaussConfig cfg;
  cfg.params = p;
  return cfg;
}

LinGaussEnv::LinGaussEnv(LinGaussConfig cfg) : config_(std::move(cfg)) {
  config_.params.validate();
  if (config_.episode_len < 2) throw DomainError("lingauss: episode_len must be >= 2");
  if (config_.action_repeat < 1) throw DomainError("lingauss: action_repeat must be >= 1");
  // Proportional stabilizer: B K ~ A - 0.5 I in the least-squares sense.
  const Matrix target = config_.params.a - 0.5 * Matrix::Identity(state_dim(), state_dim());
  feedback_gain_ = config_.params.b.completeOrthogonalDecomposition().solve(target);
}

Vector LinGaussEnv::init_state(SeededRng& rng) const {
  const auto& p = config_.params;
  Vector x = p.m0;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += std::sqrt(p.p0[i]) * rng.normal();
  return x;
}

Vector LinGaussEnv::step(const Vector& state, const Vector& action, SeededRng& rng,
                         StepInfo* info) const {
  const auto& p = config_.params;
  if (state.size() != p.a.rows()) throw ShapeError("lingauss: bad state size");
  if (action.size() != p.b.cols()) throw ShapeError("lingauss: bad action size");
  bool clamped = false;
  const Vector a = clamp_action(action, &clamped);
  if (info) info->action_clamped = clamped;

  Vector x = state;
  for (int rep = 0; rep < config_.action_repeat; ++rep) {
    Vector next = p.a * x + p.b * a;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      if (p.q[i] > 0.0) next[i] += std::sqrt(p.q[i]) * rng.normal();
    }
    x = next;
  }
  return x;
}

Vector LinGaussEnv::observe(const Vector& state, SeededRng& rng) const {
  const auto& p = config_.params;
  Vector o = p.c * state;
  for (Eigen::Index i = 0; i < o.size(); ++i) {
    if (p.rv[i] > 0.0) o[i] += std::sqrt(p.rv[i]) * rng.normal();
  }
  return o;
}

Task LinGaussEnv::task(const std::string& task_id) const {
  if (task_id != "regulate") throw DomainError("lingauss: unknown task '" + task_id + "'");
  const Matrix gain = feedback_gain_;
  return Task{task_id,
              [](const Vector& s) { return std::exp(-s.squaredNorm()); },
              [gain](const Vector& s) { return clamp_action(-gain * s, nullptr); }};
}

std::vector<std::string> LinGaussEnv::task_ids() const { return {"regulate"}; }

}  // namespace aime::env
