#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "aime/common/errors.hpp"
#include "aime/common/rng.hpp"

namespace aime::env {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ObsMode { mdp, lpomdp };

inline std::string to_string(ObsMode m) { return m == ObsMode::mdp ? "mdp" : "lpomdp"; }
ObsMode obs_mode_from_string(const std::string& s);

struct StepInfo {
  bool action_clamped = false;
};

/// A task on an embodiment: per-step reward (bounded, see each environment's
/// documentation) and a scripted expert controller acting on the true state.
struct Task {
  std::string id;
  std::function<double(const Vector& state)> reward;
  std::function<Vector(const Vector& state)> expert;
};

/// Embodiments are value objects. Stepping is a pure function of
/// (state, action, rng stream), so replaying a seed reproduces trajectories
/// bit-identically and episodes can run in parallel.
class Env {
 public:
  virtual ~Env() = default;

  virtual const std::string& id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual int episode_len() const = 0;
  virtual int action_repeat() const = 0;
  virtual ObsMode obs_mode() const = 0;

  /// Draws the initial state.
  virtual Vector init_state(SeededRng& rng) const = 0;

  /// Applies the action `action_repeat` times. Out-of-range actions are
  /// clamped to [-1, 1] and flagged in `info`.
  virtual Vector step(const Vector& state, const Vector& action, SeededRng& rng,
                      StepInfo* info = nullptr) const = 0;

  /// Emits the observation for a state (full state for MDP mode, position
  /// block for LPOMDP). Observation noise, when present, draws from `rng`.
  virtual Vector observe(const Vector& state, SeededRng& rng) const = 0;

  virtual Task task(const std::string& task_id) const = 0;
  virtual std::vector<std::string> task_ids() const = 0;
};

/// Clamps each action coordinate to [-1, 1]; sets *clamped when it fired.
Vector clamp_action(const Vector& a, bool* clamped);

}  // namespace aime::env
