#pragma once

#include "aime/env/env.hpp"

namespace aime::env {

/// Planar point mass with drag inside a square box. State (px, py, vx, vy):
///   v' = (1 - drag) * v + dt * a,   p' = clamp(p + dt * v', +-bound).
/// Nonlinear through wall clamping and action saturation. One embodiment,
/// three tasks:
///   reach-east  — reward exp(-3 |p - (0.8, 0)|), range (0, 1]
///   reach-north — reward exp(-3 |p - (0, 0.8)|), range (0, 1]
///   orbit       — reward clamp(tangential speed / 0.5, -1, 1) * radial
///                 window exp(-4 (|p| - 0.6)^2), range [-1, 1]
/// Reach experts are saturated PD laws a = clip(kp (goal - p) - kd v); the
/// orbit expert tracks a tangential velocity target.
struct PointMassConfig {
  int episode_len = 50;
  int action_repeat = 1;
  ObsMode mode = ObsMode::mdp;
  double dt = 0.1;
  double drag = 0.1;
  double bound = 1.0;
  double process_noise = 0.0;   // stddev of per-substep velocity noise
  double init_pos_scale = 0.2;  // initial position ~ U(-s, s)^2
};

class PointMassEnv final : public Env {
 public:
  explicit PointMassEnv(PointMassConfig cfg);

  const std::string& id() const override { return id_; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int obs_dim() const override { return config_.mode == ObsMode::mdp ? 4 : 2; }
  int episode_len() const override { return config_.episode_len; }
  int action_repeat() const override { return config_.action_repeat; }
  ObsMode obs_mode() const override { return config_.mode; }

  Vector init_state(SeededRng& rng) const override;
  Vector step(const Vector& state, const Vector& action, SeededRng& rng,
              StepInfo* info = nullptr) const override;
  Vector observe(const Vector& state, SeededRng& rng) const override;

  Task task(const std::string& task_id) const override;
  std::vector<std::string> task_ids() const override;

  const PointMassConfig& config() const { return config_; }

 private:
  PointMassConfig config_;
  std::string id_ = "pointmass";
};

}  // namespace aime::env
