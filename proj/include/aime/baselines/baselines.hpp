#pragma once

#include "aime/baselines/stacked.hpp"

namespace aime::baselines {

/// Shared training setup for every comparison method (same blocks, same
/// optimizer family as the main method).
struct BaselinesConfig {
  int stack = 5;
  int hidden = 64;
  int layers = 2;
  int epochs = 30;
  int steps_per_epoch = 50;
  int batch = 64;
  double lr = 1e-3;
  double grad_clip = 100.0;
  double val_fraction = 0.3;  // 7:3 train/validation split over pairs
};

void to_json(nlohmann::ordered_json& j, const BaselinesConfig& cfg);
void from_json(const nlohmann::ordered_json& j, BaselinesConfig& cfg);

struct SupervisedLog {
  int epoch = 0;  // 0 is the pre-training validation entry
  double train_nll = 0.0;
  double val_nll = 0.0;
};

/// Column-major design matrices for supervised stages.
struct PairSet {
  Matrix inputs;
  Matrix targets;
  Eigen::Index size() const { return inputs.cols(); }
};

/// (stack_t, o_{t+1}) -> a_t pairs for inverse-dynamics training.
PairSet idm_pairs(const data::Dataset& dataset, int stack);
/// stack_t -> a_t pairs for behavioural cloning on true actions.
PairSet bc_pairs(const data::Dataset& dataset, int stack);
/// (stack_t, a_t) -> o_{t+1} pairs for observation-space forward models.
PairSet forward_pairs(const data::Dataset& dataset, int stack);

/// Deterministic shuffled split into train/validation parts.
std::pair<PairSet, PairSet> split_pairs(const PairSet& pairs, double val_fraction,
                                        std::uint64_t seed);

/// Explicit inverse dynamics q(a_t | stack_t, o_{t+1}), a tanh-Gaussian head.
class ObsIdm {
 public:
  ObsIdm(StackedPolicyConfig cfg, int obs_dim, int action_dim, std::uint64_t seed);
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  int input_dim() const { return (config_.stack + 1) * obs_dim_; }
  int action_dim() const { return action_dim_; }
  diff::MlpArrays bind(const TapeBinding& binding) const;
  TanhGaussian dist(const diff::MlpArrays& arrays, const Array& input) const;
  /// Mean label for one (stack, next-observation) input column.
  Matrix label(const Matrix& inputs) const;

 private:
  StackedPolicyConfig config_;
  int obs_dim_;
  int action_dim_;
  diff::ParamStore params_;
};

/// One-step observation-space forward model p(o_{t+1} | stack_t, a_t) with
/// unit variance (mirrors the main decoder default).
class ObsForwardModel {
 public:
  ObsForwardModel(StackedPolicyConfig cfg, int obs_dim, int action_dim, std::uint64_t seed);
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  int input_dim() const { return config_.stack * obs_dim_ + action_dim_; }
  diff::MlpArrays bind(const TapeBinding& binding) const;
  diff::Gaussian dist(const diff::MlpArrays& arrays, const Array& input) const;
  std::string params_hash() const { return params_.sha256(); }

 private:
  StackedPolicyConfig config_;
  int obs_dim_;
  int action_dim_;
  diff::ParamStore params_;
};

struct IdmExplicitResult {
  ObsIdm idm;
  std::vector<SupervisedLog> log;  // best-validation checkpoint returned
};

/// Supervised inverse-dynamics training with validation-based selection (the
/// initialization is a candidate, so the returned checkpoint never validates
/// worse than it).
IdmExplicitResult train_idm_explicit(const data::Dataset& body, const BaselinesConfig& cfg,
                                     std::uint64_t seed);

struct BcoResult {
  StackedObsPolicy policy;
  std::vector<SupervisedLog> idm_log;
  std::vector<SupervisedLog> bc_log;
};

/// BCO(0): label the action-free demonstrations with the trained inverse
/// dynamics, then clone the labeled actions.
BcoResult bco(const data::Dataset& body, const data::Dataset& demo, const BaselinesConfig& cfg,
              std::uint64_t seed);

struct BcResult {
  StackedObsPolicy policy;
  std::vector<SupervisedLog> log;
};

/// Behavioural cloning with true actions (oracle upper baseline).
BcResult bc_oracle(const data::Dataset& demo_with_actions, const BaselinesConfig& cfg,
                   std::uint64_t seed);

/// Forward-model stage of IIDM (exposed on its own so tests can substitute an
/// exactly injected model).
struct ForwardModelResult {
  ObsForwardModel forward;
  std::vector<SupervisedLog> log;
};
ForwardModelResult train_forward_model(const data::Dataset& body, const BaselinesConfig& cfg,
                                       std::uint64_t seed);

struct IidmPolicyResult {
  StackedObsPolicy policy;
  std::vector<SupervisedLog> log;  // val_nll unused (no selection)
};

/// Policy stage of IIDM: maximize demo next-observation likelihood through
/// the frozen forward model with reparameterized policy actions. The forward
/// model's hash is verified unchanged.
IidmPolicyResult iidm_policy(const ObsForwardModel& forward, const data::Dataset& demo,
                             int action_dim, const BaselinesConfig& cfg, std::uint64_t seed);

struct IidmResult {
  StackedObsPolicy policy;
  ObsForwardModel forward;
  std::vector<SupervisedLog> forward_log;
  std::vector<SupervisedLog> policy_log;
};

/// Implicit inverse dynamics without latent state: both stages end to end.
IidmResult iidm(const data::Dataset& body, const data::Dataset& demo, const BaselinesConfig& cfg,
                std::uint64_t seed);

}  // namespace aime::baselines
