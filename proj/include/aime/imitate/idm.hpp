#pragma once

#include "aime/imitate/phase2.hpp"

namespace aime::imitate {

struct IdmConfig {
  int hidden = 64;
  int layers = 2;
  int epochs = 20;
  int steps_per_epoch = 100;
  int batch = 16;
  int chunk_len = 30;
  double lr = 1e-3;
  double grad_clip = 100.0;
};

/// Action decoder on the frozen model's filtered latents,
/// q(a_t | s_t, f(o_{t+1})), a tanh-Gaussian head over the action space.
/// Inputs are detached from the world model, so its parameters never receive
/// gradients from this head.
class LatentIdm {
 public:
  LatentIdm(IdmConfig cfg, int det_size, int stoch_size, int feature_dim, int action_dim,
            std::uint64_t init_seed);

  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  int action_dim() const { return action_dim_; }

  diff::MlpArrays bind(const TapeBinding& binding) const;
  /// belief (h, s) carried into step t, plus the feature of the next
  /// observation.
  TanhGaussian dist(const diff::MlpArrays& arrays, const Array& h, const Array& s,
                    const Array& next_feature) const;

 private:
  IdmConfig config_;
  int action_dim_;
  diff::ParamStore params_;
};

struct IdmTrainLog {
  int epoch = 0;
  double nll = 0.0;
};

struct IdmResult {
  LatentIdm idm;
  std::vector<IdmTrainLog> log;
};

/// Trains the latent IDM by maximum likelihood on embodiment data filtered
/// through the frozen model (true actions drive the filter). The model's
/// parameter hash is unchanged by construction and verified.
IdmResult train_idm_head(const wm::WorldModel& model, const data::Dataset& body,
                         const IdmConfig& cfg, std::uint64_t seed);

/// Average IDM log-likelihood of true actions over `chunks` sampled chunks.
double idm_log_likelihood(const wm::WorldModel& model, const LatentIdm& idm,
                          const data::Dataset& body, int chunks, Eigen::Index chunk_len,
                          std::uint64_t seed);

/// Phase 2 with the IDM posterior: rollout actions are sampled from the
/// (frozen) IDM, the sequence objective is computed as usual, and the policy
/// is pulled toward the IDM through the action divergence term
///   J_idm = -sum_t KL(q(a_t | s_t, f(o_{t+1})) || pi(a_t | s_t)),
/// the only term carrying policy gradients. The world model and IDM stay
/// frozen (hash-verified).
Phase2Result aime_idm_phase2(const wm::WorldModel& model, const LatentIdm& idm,
                             const data::Dataset& demo, const ImitationConfig& cfg,
                             std::uint64_t seed,
                             const data::Dataset* eval_actions = nullptr);

}  // namespace aime::imitate
