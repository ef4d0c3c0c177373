#pragma once

#include "aime/data/collect.hpp"
#include "aime/imitate/policy.hpp"
#include "aime/wm/ssm.hpp"

namespace aime::imitate {

/// Rollout adapter: filters the incoming observations through the frozen
/// model with the policy's own past actions and acts on the belief. The first
/// action comes from the zero belief; the reset observation is never
/// conditioned on (matching the stored-trajectory convention). Deterministic
/// evaluation acts with the squashed policy mean; stochastic evaluation
/// samples per step.
std::unique_ptr<data::RolloutPolicy> latent_policy_adapter(const wm::WorldModel& model,
                                                           const LatentPolicy& policy,
                                                           bool stochastic = false);

/// Runs evaluation episodes and returns the per-episode returns. Same seed,
/// same returns.
std::vector<double> deploy_policy(const wm::WorldModel& model, const LatentPolicy& policy,
                                  const env::Env& env, const env::Task& task, int episodes,
                                  std::uint64_t seed, bool stochastic = false);

/// 100 * (mean(returns) - random_mean) / (expert_mean - random_mean): the
/// expert pins 100, the random baseline pins 0. Raw expert ratio is reported
/// alongside by callers that want the undisplaced convention.
double normalized_return(const std::vector<double>& returns, double expert_mean,
                         double random_mean);

double mean_of(const std::vector<double>& values);

}  // namespace aime::imitate
