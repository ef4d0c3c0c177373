#pragma once

#include <filesystem>

#include "aime/data/collect.hpp"
#include "aime/diff/nets.hpp"

namespace aime::baselines {

using diff::Array;
using diff::Matrix;
using diff::TanhGaussian;
using diff::TapeBinding;

/// Frame stacking over stored trajectories. The stack for the action at step
/// t holds the k most recent observations up to and including o_t; steps
/// before the first observation are zero-padded (the same warm-up the latent
/// filter gets from its zero belief). Stacking is causal by construction.
Matrix stacked_input(const data::Trajectory& tr, Eigen::Index t, int stack);

struct StackedPolicyConfig {
  int stack = 5;
  int hidden = 64;
  int layers = 2;
};

/// tanh-Gaussian policy over the concatenated last-k observations.
class StackedObsPolicy {
 public:
  StackedObsPolicy(StackedPolicyConfig cfg, int obs_dim, int action_dim, std::uint64_t seed);

  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  const StackedPolicyConfig& config() const { return config_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  int input_dim() const { return config_.stack * obs_dim_; }

  diff::MlpArrays bind(const TapeBinding& binding) const;
  TanhGaussian dist(const diff::MlpArrays& arrays, const Array& stacked_obs) const;

  void save(const std::filesystem::path& path) const;
  static StackedObsPolicy load(const std::filesystem::path& path);

 private:
  StackedObsPolicy(StackedPolicyConfig cfg, int obs_dim, int action_dim, diff::ParamStore params);
  StackedPolicyConfig config_;
  int obs_dim_;
  int action_dim_;
  diff::ParamStore params_;
};

/// Rollout adapter maintaining the observation history (warm-up zero-padded;
/// the reset observation is not part of the stack, matching the training
/// pairs). Deterministic mean actions unless `stochastic`.
std::unique_ptr<data::RolloutPolicy> stacked_policy_adapter(const StackedObsPolicy& policy,
                                                            bool stochastic = false);

std::vector<double> deploy_stacked_policy(const StackedObsPolicy& policy, const env::Env& env,
                                          const env::Task& task, int episodes, std::uint64_t seed,
                                          bool stochastic = false);

}  // namespace aime::baselines
