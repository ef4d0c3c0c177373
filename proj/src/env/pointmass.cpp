#include "aime/env/pointmass.hpp"

#include <cmath>

#include "aime/common/errors.hpp"

namespace aime::env {

ObsMode obs_mode_from_string(const std::string& s) {
  if (s == "mdp") return ObsMode::mdp;
  if (s == "lpomdp") return ObsMode::lpomdp;
  throw DomainError("unknown observation mode '" + s + "'");
}

Vector clamp_action(const Vector& a, bool* clamped) {
  Vector out = a;
  bool fired = false;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out[i] > 1.0) {
      out[i] = 1.0;
      fired = true;
    } else if (out[i] < -1.0) {
      out[i] = -1.0;
      fired = true;
    }
  }
  if (clamped) *clamped = fired;
  return out;
}

PointMassEnv::PointMassEnv(PointMassConfig cfg) : config_(cfg) {
  if (cfg.episode_len < 2) throw DomainError("pointmass: episode_len must be >= 2");
  if (cfg.action_repeat < 1) throw DomainError("pointmass: action_repeat must be >= 1");
}

Vector PointMassEnv::init_state(SeededRng& rng) const {
  Vector s(4);
  s[0] = rng.uniform(-config_.init_pos_scale, config_.init_pos_scale);
  s[1] = rng.uniform(-config_.init_pos_scale, config_.init_pos_scale);
  s[2] = 0.0;
  s[3] = 0.0;
  return s;
}

Vector PointMassEnv::step(const Vector& state, const Vector& action, SeededRng& rng,
                          StepInfo* info) const {
  if (state.size() != 4) throw ShapeError("pointmass: state must have 4 entries");
  if (action.size() != 2) throw ShapeError("pointmass: action must have 2 entries");
  bool clamped = false;
  const Vector a = clamp_action(action, &clamped);
  if (info) info->action_clamped = clamped;

  Vector s = state;
  for (int rep = 0; rep < config_.action_repeat; ++rep) {
    for (int i = 0; i < 2; ++i) {
      double v = (1.0 - config_.drag) * s[2 + i] + config_.dt * a[i];
      if (config_.process_noise > 0.0) v += config_.process_noise * rng.normal();
      s[2 + i] = v;
      s[i] = std::clamp(s[i] + config_.dt * v, -config_.bound, config_.bound);
    }
  }
  return s;
}

Vector PointMassEnv::observe(const Vector& state, SeededRng&) const {
  if (config_.mode == ObsMode::mdp) return state;
  return state.head(2);
}

namespace {

Vector pd_expert(const Vector& state, double gx, double gy) {
  // Fixed point at the goal with zero velocity: both terms vanish there.
  const double kp = 4.0, kd = 2.5;
  Vector a(2);
  a[0] = kp * (gx - state[0]) - kd * state[2];
  a[1] = kp * (gy - state[1]) - kd * state[3];
  return clamp_action(a, nullptr);
}

double reach_reward(const Vector& state, double gx, double gy) {
  const double dx = state[0] - gx, dy = state[1] - gy;
  return std::exp(-3.0 * std::sqrt(dx * dx + dy * dy));
}

double orbit_reward(const Vector& state) {
  const double r = std::sqrt(state[0] * state[0] + state[1] * state[1]);
  const double tangential = (state[0] * state[3] - state[1] * state[2]) / std::max(r, 0.1);
  const double ring = std::exp(-4.0 * (r - 0.6) * (r - 0.6));
  return std::clamp(tangential / 0.5, -1.0, 1.0) * ring;
}

Vector orbit_expert(const Vector& state) {
  const double r0 = 0.6, v0 = 0.5;
  const double r = std::sqrt(state[0] * state[0] + state[1] * state[1]);
  double ux, uy;
  if (r < 1e-6) {
    ux = 1.0;
    uy = 0.0;
  } else {
    ux = state[0] / r;
    uy = state[1] / r;
  }
  // Desired velocity: counter-clockwise tangential motion plus radial correction.
  const double vdx = -uy * v0 + 1.2 * (r0 - r) * ux;
  const double vdy = ux * v0 + 1.2 * (r0 - r) * uy;
  Vector a(2);
  a[0] = 4.0 * (vdx - state[2]);
  a[1] = 4.0 * (vdy - state[3]);
  return clamp_action(a, nullptr);
}

}  // namespace

Task PointMassEnv::task(const std::string& task_id) const {
  if (task_id == "reach-east") {
    return Task{task_id, [](const Vector& s) { return reach_reward(s, 0.8, 0.0); },
                [](const Vector& s) { return pd_expert(s, 0.8, 0.0); }};
  }
  if (task_id == "reach-north") {
    return Task{task_id, [](const Vector& s) { return reach_reward(s, 0.0, 0.8); },
                [](const Vector& s) { return pd_expert(s, 0.0, 0.8); }};
  }
  if (task_id == "orbit") {
    return Task{task_id, [](const Vector& s) { return orbit_reward(s); },
                [](const Vector& s) { return orbit_expert(s); }};
  }
  throw DomainError("pointmass: unknown task '" + task_id + "'");
}

std::vector<std::string> PointMassEnv::task_ids() const {
  return {"reach-east", "reach-north", "orbit"};
}

}  // namespace aime::env
