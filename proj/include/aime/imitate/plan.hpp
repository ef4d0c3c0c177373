#pragma once

#include "aime/wm/elbo.hpp"

namespace aime::imitate {

struct PlanConfig {
  int iterations = 500;
  double lr = 0.1;
  double grad_clip = 100.0;
};

struct PlanResult {
  diff::Matrix actions;  // T x action_dim, inside (-1, 1)
  double best_objective = 0.0;
  double initial_objective = 0.0;  // objective of the all-zero action sequence
};

/// Per-sequence action inference as trajectory tracking: ascends the sequence
/// objective over pre-tanh action variables (initialized at 0 so actions
/// start at 0) with Adam, under one fixed latent-noise draw (common random
/// numbers make the objective a deterministic function of the actions).
/// Returns the best iterate, so the result never scores below the
/// initialization. Aborts with the iteration index if the objective turns
/// non-finite.
PlanResult plan_actions(const wm::WorldModel& model, const diff::Matrix& observations,
                        const PlanConfig& cfg, std::uint64_t seed);

}  // namespace aime::imitate
