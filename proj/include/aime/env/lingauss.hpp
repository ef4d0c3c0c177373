#pragma once

#include "aime/env/env.hpp"

namespace aime::env {

/// Linear-Gaussian system
///   x_{t+1} = A x_t + B a_t + w,  w ~ N(0, diag(q))
///   o_t     = C x_t + v,          v ~ N(0, diag(rv))
///   x_0     ~ N(m0, diag(p0))
/// with exactly computable log-evidence (see kalman.hpp). Serves as the
/// oracle embodiment for checking the learned model's bound.
struct LinGaussParams {
  Matrix a;   // n x n, spectral radius <= 1.05
  Matrix b;   // n x m
  Matrix c;   // p x n
  Vector q;   // n, >= 0 (process noise variances)
  Vector rv;  // p, >= 0 (observation noise variances)
  Vector m0;  // n
  Vector p0;  // n, >= 0 (initial state variances)

  void validate() const;
};

struct LinGaussConfig {
  LinGaussParams params;
  int episode_len = 30;
  int action_repeat = 1;
  ObsMode mode = ObsMode::mdp;
};

/// Default oracle instance: 2-d rotation dynamics, invertible actuation.
/// With `noiseless` all three noise sources are zero (B stays invertible),
/// the setting used by the action-recovery checks.
LinGaussConfig default_lingauss(bool noiseless = false);

class LinGaussEnv final : public Env {
 public:
  explicit LinGaussEnv(LinGaussConfig cfg);

  const std::string& id() const override { return id_; }
  int state_dim() const override { return static_cast<int>(config_.params.a.rows()); }
  int action_dim() const override { return static_cast<int>(config_.params.b.cols()); }
  int obs_dim() const override { return static_cast<int>(config_.params.c.rows()); }
  int episode_len() const override { return config_.episode_len; }
  int action_repeat() const override { return config_.action_repeat; }
  ObsMode obs_mode() const override { return config_.mode; }

  Vector init_state(SeededRng& rng) const override;
  Vector step(const Vector& state, const Vector& action, SeededRng& rng,
              StepInfo* info = nullptr) const override;
  Vector observe(const Vector& state, SeededRng& rng) const override;

  Task task(const std::string& task_id) const override;
  std::vector<std::string> task_ids() const override;

  const LinGaussParams& params() const { return config_.params; }
  const LinGaussConfig& config() const { return config_; }

 private:
  LinGaussConfig config_;
  Matrix feedback_gain_;  // expert law a = clip(-K x)
  std::string id_ = "lingauss";
};

}  // namespace aime::env
