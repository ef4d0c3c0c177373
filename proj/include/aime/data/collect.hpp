#pragma once

#include <functional>
#include <memory>

#include "aime/data/dataset.hpp"
#include "aime/env/env.hpp"

namespace aime::data {

/// Behaviour driving data collection. `begin_episode` resets any internal
/// state (filters, rngs); `act` sees the latest observation and, for
/// privileged controllers such as scripted experts, the true state.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual void begin_episode(std::uint64_t episode_seed) = 0;
  virtual env::Vector act(const env::Vector& observation, const env::Vector& state) = 0;
};

std::unique_ptr<RolloutPolicy> expert_policy(env::Task task);
std::unique_ptr<RolloutPolicy> uniform_random_policy(int action_dim);
/// Expert action plus clipped Gaussian exploration noise; with probability
/// `random_episode_prob` an entire episode is driven uniformly at random.
std::unique_ptr<RolloutPolicy> noisy_expert_policy(env::Task task, int action_dim,
                                                   double action_noise,
                                                   double random_episode_prob);

/// Rolls `episodes` complete episodes and records o_1..o_T, a_0..a_{T-1},
/// r_1..r_T per trajectory. Deterministic under `seed` (per-episode streams
/// are derived, so collections are byte-identical on re-run). A policy
/// emitting a non-finite action aborts with the failing episode index.
Dataset collect(const env::Env& env, const env::Task& task, RolloutPolicy& policy, int episodes,
                std::uint64_t seed);

}  // namespace aime::data
