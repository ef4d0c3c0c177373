#pragma once

#include "aime/data/sampling.hpp"
#include "aime/imitate/policy.hpp"
#include "aime/wm/elbo.hpp"

namespace aime::imitate {

struct ImitationConfig {
  int epochs = 50;
  int steps_per_epoch = 100;
  int batch = 16;
  int chunk_len = 30;
  double lr = 1e-3;
  double grad_clip = 100.0;

  enum class Variant { aime, aime_idm, plan };
  Variant variant = Variant::aime;

  /// Objective-term selection for the ablation study. The mask picks which
  /// terms are ascended; the rollout path is identical across masks.
  enum class Mask { full, rec_only, kl_only };
  Mask mask = Mask::full;

  PolicyConfig policy;
};

void to_json(nlohmann::ordered_json& j, const ImitationConfig& cfg);
void from_json(const nlohmann::ordered_json& j, ImitationConfig& cfg);
std::string to_string(ImitationConfig::Variant v);
ImitationConfig::Variant variant_from_string(const std::string& s);
std::string to_string(ImitationConfig::Mask m);
ImitationConfig::Mask mask_from_string(const std::string& s);

struct Phase2Stats {
  int epoch = 0;
  double j = 0.0;
  double j_rec = 0.0;
  double j_kl = 0.0;
  double action_mse = std::numeric_limits<double>::quiet_NaN();
};

void write_phase2_log(const std::filesystem::path& path, const std::vector<Phase2Stats>& log);

struct Phase2Result {
  LatentPolicy policy;
  std::vector<Phase2Stats> log;
};

/// Phase 2: the policy acts as the action-inference model. Each chunk is
/// rolled from the zero belief with a_{t-1} ~ pi(. | h_{t-1}, s_{t-1})
/// (reparameterized, so gradients flow through the sampled actions into the
/// dynamics), the sequence objective is computed exactly as in phase 1 but in
/// its plain form (no free-nats/balancing/scaling; a frozen model needs no
/// regularization), and only the policy parameters are updated. The world
/// model is bound as constants and its hash is verified before and after;
/// any mutation raises FrozenViolation.
///
/// `eval_actions`, when given, must hold the same trajectories as `demo` with
/// their true actions; it is used only to log the mean-action MSE per epoch.
Phase2Result aime_phase2(const wm::WorldModel& model, const data::Dataset& demo,
                         const ImitationConfig& cfg, std::uint64_t seed,
                         const data::Dataset* eval_actions = nullptr);

/// Objective terms of one rollout on a fixed chunk and noise seed. j is the
/// mask-selected objective; j_rec and j_kl are always the plain terms, and
/// the full mask satisfies j = j_rec + j_kl exactly.
struct Phase2Eval {
  double j = 0.0;
  double j_rec = 0.0;
  double j_kl = 0.0;
};
Phase2Eval evaluate_phase2_objective(const wm::WorldModel& model, const LatentPolicy& policy,
                                     const data::ChunkBatch& chunk, std::uint64_t noise_seed,
                                     ImitationConfig::Mask mask = ImitationConfig::Mask::full);

/// Mean-action MSE of the policy against true actions along filtered demo
/// trajectories (mean-path filtering, deterministic).
double policy_action_mse(const wm::WorldModel& model, const LatentPolicy& policy,
                         const data::Dataset& with_actions, std::size_t max_trajectories = 4);

/// Both sides of the joint state-action divergence identity on one sampled
/// path: lhs carries the policy log-terms on posterior and prior sides
/// (factorized form), rhs is the state-only divergence. Their difference is
/// pure floating-point noise; the policy term cancels algebraically.
struct JointKlCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};
JointKlCheck joint_kl_check(const wm::WorldModel& model, const LatentPolicy& policy,
                            const data::ChunkBatch& chunk, std::uint64_t noise_seed);

}  // namespace aime::imitate
