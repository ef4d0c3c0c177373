#include "aime/imitate/phase2.hpp"

#include <cmath>

#include "aime/common/csv.hpp"
#include "aime/diff/adam.hpp"

namespace aime::imitate {

using namespace aime::diff;
using wm::SSMArrays;
using wm::SSMConfig;
using wm::StateBelief;

void to_json(nlohmann::ordered_json& j, const ImitationConfig& cfg) {
  j = nlohmann::ordered_json{
      {"epochs", cfg.epochs},       {"steps_per_epoch", cfg.steps_per_epoch},
      {"batch", cfg.batch},         {"chunk_len", cfg.chunk_len},
      {"lr", cfg.lr},               {"grad_clip", cfg.grad_clip},
      {"variant", to_string(cfg.variant)},
      {"mask", to_string(cfg.mask)},
      {"policy_hidden", cfg.policy.hidden},
      {"policy_layers", cfg.policy.layers},
  };
}

void from_json(const nlohmann::ordered_json& j, ImitationConfig& cfg) {
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.chunk_len = j.value("chunk_len", cfg.chunk_len);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
  cfg.variant = variant_from_string(j.value("variant", std::string("aime")));
  cfg.mask = mask_from_string(j.value("mask", std::string("full")));
  cfg.policy.hidden = j.value("policy_hidden", cfg.policy.hidden);
  cfg.policy.layers = j.value("policy_layers", cfg.policy.layers);
}

std::string to_string(ImitationConfig::Variant v) {
  switch (v) {
    case ImitationConfig::Variant::aime: return "aime";
    case ImitationConfig::Variant::aime_idm: return "aime-idm";
    case ImitationConfig::Variant::plan: return "plan";
  }
  return "aime";
}

ImitationConfig::Variant variant_from_string(const std::string& s) {
  if (s == "aime") return ImitationConfig::Variant::aime;
  if (s == "aime-idm") return ImitationConfig::Variant::aime_idm;
  if (s == "plan") return ImitationConfig::Variant::plan;
  throw DomainError("unknown imitation variant '" + s + "'");
}

std::string to_string(ImitationConfig::Mask m) {
  switch (m) {
    case ImitationConfig::Mask::full: return "full";
    case ImitationConfig::Mask::rec_only: return "rec-only";
    case ImitationConfig::Mask::kl_only: return "kl-only";
  }
  return "full";
}

ImitationConfig::Mask mask_from_string(const std::string& s) {
  if (s == "full") return ImitationConfig::Mask::full;
  if (s == "rec-only") return ImitationConfig::Mask::rec_only;
  if (s == "kl-only") return ImitationConfig::Mask::kl_only;
  throw DomainError("unknown objective mask '" + s + "'");
}

void write_phase2_log(const std::filesystem::path& path, const std::vector<Phase2Stats>& log) {
  CsvWriter csv(path.string(), {"epoch", "j", "j_rec", "j_kl", "action_mse"});
  for (const Phase2Stats& e : log) {
    csv.row({static_cast<double>(e.epoch), e.j, e.j_rec, e.j_kl, e.action_mse});
  }
}

namespace {

struct RolloutSums {
  Array rec;  // 1 x B
  Array kl;   // 1 x B
};

/// Closed-loop rollout: actions sampled from the policy, plain Eq.-1 terms.
RolloutSums policy_rollout(const SSMArrays& arrays, const SSMConfig& cfg,
                           const MlpArrays& policy_arrays, const LatentPolicy& policy,
                           const std::vector<Array>& obs, wm::NoiseSource& latent_noise,
                           wm::NoiseSource& action_noise) {
  Tape& tape = *obs[0].tape();
  const Eigen::Index batch = obs[0].cols();
  StateBelief belief = wm::initial_belief(tape, cfg, batch);
  RolloutSums sums;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    TanhGaussian pi = policy.dist(policy_arrays, belief.h, belief.s);
    Array action =
        pi.sample(tape.constant(action_noise.next(policy.action_dim(), batch)));
    Array feature = wm::encode(arrays, cfg, obs[t]);
    Array noise = tape.constant(latent_noise.next(cfg.stoch_size, batch));
    belief = wm::posterior_step(arrays, cfg, belief, action, feature, noise);

    Gaussian dec = wm::decode(arrays, cfg, belief.h, belief.s);
    Array rec_t = gaussian_logpdf(dec, obs[t]);
    Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);
    if (!rec_t.value().allFinite() || !kl_t.value().allFinite()) {
      throw NumericalError("phase 2: non-finite objective term", static_cast<long>(t));
    }
    sums.rec = t == 0 ? rec_t : add(sums.rec, rec_t);
    sums.kl = t == 0 ? kl_t : add(sums.kl, kl_t);
  }
  return sums;
}

struct Objective {
  Array j, rec, kl, masked;
};

Objective reduce_objective(const RolloutSums& sums, Eigen::Index batch,
                           ImitationConfig::Mask mask) {
  Objective o;
  const double inv = 1.0 / static_cast<double>(batch);
  o.rec = scale(sum(sums.rec), inv);
  o.kl = scale(sum(neg(sums.kl)), inv);
  o.j = add(o.rec, o.kl);
  switch (mask) {
    case ImitationConfig::Mask::full: o.masked = o.j; break;
    case ImitationConfig::Mask::rec_only: o.masked = o.rec; break;
    case ImitationConfig::Mask::kl_only: o.masked = o.kl; break;
  }
  return o;
}

std::vector<Array> to_arrays(Tape& tape, const std::vector<Matrix>& mats) {
  std::vector<Array> out;
  out.reserve(mats.size());
  for (const Matrix& m : mats) out.push_back(tape.constant(m));
  return out;
}

}  // namespace

Phase2Result aime_phase2(const wm::WorldModel& model, const data::Dataset& demo,
                         const ImitationConfig& cfg, std::uint64_t seed,
                         const data::Dataset* eval_actions) {
  if (demo.has_actions() || demo.role() != data::DatasetRole::demonstration) {
    throw DomainError("aime_phase2: demo dataset must be action-free demonstration data");
  }
  const SSMConfig& mcfg = model.config();
  const std::string frozen_hash = model.params_hash();

  LatentPolicy policy(cfg.policy, mcfg.det_size, mcfg.stoch_size, mcfg.action_dim,
                      derive_seed(seed, "phase2-policy"));
  AdamOptimizer optimizer(policy.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  SeededRng sample_rng(derive_seed(seed, "phase2-sample"));
  SeededRng latent_rng(derive_seed(seed, "phase2-latent-noise"));
  SeededRng action_rng(derive_seed(seed, "phase2-action-noise"));

  std::vector<Phase2Stats> log;
  Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Phase2Stats stats;
    stats.epoch = epoch;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      tape.clear();
      TapeBinding model_bind(tape, model.params(), false);
      TapeBinding policy_bind(tape, policy.params(), true);
      SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
      MlpArrays pol = policy.bind(policy_bind);

      data::ChunkBatch chunk =
          data::sample_chunks(demo, cfg.batch, cfg.chunk_len, sample_rng, false);
      std::vector<Array> obs = to_arrays(tape, chunk.obs);
      wm::GaussianNoise latent_noise(latent_rng);
      wm::GaussianNoise action_noise(action_rng);

      RolloutSums sums;
      try {
        sums = policy_rollout(arrays, mcfg, pol, policy, obs, latent_noise, action_noise);
      } catch (const NumericalError& err) {
        throw TrainingDiverged(std::string("aime_phase2: ") + err.what(), epoch, step);
      }
      Objective obj = reduce_objective(sums, cfg.batch, cfg.mask);
      if (!std::isfinite(obj.j.value()(0, 0))) {
        throw TrainingDiverged("aime_phase2: objective diverged", epoch, step);
      }
      tape.backward(neg(obj.masked));
      optimizer.step(policy_bind);

      stats.j += obj.j.value()(0, 0);
      stats.j_rec += obj.rec.value()(0, 0);
      stats.j_kl += obj.kl.value()(0, 0);
    }
    const double inv = 1.0 / static_cast<double>(cfg.steps_per_epoch);
    stats.j *= inv;
    stats.j_rec *= inv;
    stats.j_kl *= inv;
    if (eval_actions) stats.action_mse = policy_action_mse(model, policy, *eval_actions);
    log.push_back(stats);
  }

  if (model.params_hash() != frozen_hash) {
    throw FrozenViolation("aime_phase2: world-model parameters changed during phase 2");
  }
  return Phase2Result{std::move(policy), std::move(log)};
}

Phase2Eval evaluate_phase2_objective(const wm::WorldModel& model, const LatentPolicy& policy,
                                     const data::ChunkBatch& chunk, std::uint64_t noise_seed,
                                     ImitationConfig::Mask mask) {
  const SSMConfig& mcfg = model.config();
  Tape tape;
  TapeBinding model_bind(tape, model.params(), false);
  TapeBinding policy_bind(tape, policy.params(), false);
  SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
  MlpArrays pol = policy.bind(policy_bind);

  std::vector<Array> obs = to_arrays(tape, chunk.obs);
  SeededRng latent_rng(derive_seed(noise_seed, "phase2-latent-noise"));
  SeededRng action_rng(derive_seed(noise_seed, "phase2-action-noise"));
  wm::GaussianNoise latent_noise(latent_rng);
  wm::GaussianNoise action_noise(action_rng);
  RolloutSums sums = policy_rollout(arrays, mcfg, pol, policy, obs, latent_noise, action_noise);
  Objective obj = reduce_objective(sums, chunk.batch(), mask);
  return Phase2Eval{obj.masked.value()(0, 0), obj.rec.value()(0, 0), obj.kl.value()(0, 0)};
}

double policy_action_mse(const wm::WorldModel& model, const LatentPolicy& policy,
                         const data::Dataset& with_actions, std::size_t max_trajectories) {
  if (!with_actions.has_actions()) throw DomainError("policy_action_mse: actions required");
  const SSMConfig& mcfg = model.config();
  double total = 0.0;
  std::size_t count = 0;
  const std::size_t n = std::min(max_trajectories, with_actions.size());
  for (std::size_t k = 0; k < n; ++k) {
    const data::Trajectory& tr = with_actions.at(k);
    Tape tape;
    TapeBinding model_bind(tape, model.params(), false);
    TapeBinding policy_bind(tape, policy.params(), false);
    SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
    MlpArrays pol = policy.bind(policy_bind);

    StateBelief belief = wm::initial_belief(tape, mcfg, 1);
    for (Eigen::Index t = 0; t < tr.length(); ++t) {
      TanhGaussian pi = policy.dist(pol, belief.h, belief.s);
      const Matrix mean_action = pi.mean_action().value();
      total += (mean_action.col(0) - tr.actions->row(t).transpose()).squaredNorm();
      count += static_cast<std::size_t>(mean_action.rows());
      Array obs = tape.constant(tr.observations.row(t).transpose());
      belief = wm::posterior_step(arrays, mcfg, belief,
                                  tape.constant(Matrix(mean_action)),
                                  wm::encode(arrays, mcfg, obs),
                                  tape.constant(Matrix::Zero(mcfg.stoch_size, 1)));
    }
  }
  return total / static_cast<double>(count);
}

JointKlCheck joint_kl_check(const wm::WorldModel& model, const LatentPolicy& policy,
                            const data::ChunkBatch& chunk, std::uint64_t noise_seed) {
  const SSMConfig& mcfg = model.config();
  Tape tape;
  TapeBinding model_bind(tape, model.params(), false);
  TapeBinding policy_bind(tape, policy.params(), false);
  SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
  MlpArrays pol = policy.bind(policy_bind);

  std::vector<Array> obs = to_arrays(tape, chunk.obs);
  SeededRng latent_rng(derive_seed(noise_seed, "jkl-latent"));
  SeededRng action_rng(derive_seed(noise_seed, "jkl-action"));
  wm::GaussianNoise latent_noise(latent_rng);
  wm::GaussianNoise action_noise(action_rng);

  const Eigen::Index batch = obs[0].cols();
  StateBelief belief = wm::initial_belief(tape, mcfg, batch);
  Array posterior_side, prior_side, state_only;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    TanhGaussian pi = policy.dist(pol, belief.h, belief.s);
    Array action = pi.sample(tape.constant(action_noise.next(policy.action_dim(), batch)));
    // The same policy factor appears in the posterior and the prior of the
    // joint (s_t, a_{t-1}) divergence; both sides carry it explicitly here.
    Array log_pi = pi.log_prob(action);
    Array feature = wm::encode(arrays, mcfg, obs[t]);
    belief = wm::posterior_step(arrays, mcfg, belief, action, feature,
                                tape.constant(latent_noise.next(mcfg.stoch_size, batch)));
    Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);

    Array post_t = add(log_pi, kl_t);
    posterior_side = t == 0 ? post_t : add(posterior_side, post_t);
    prior_side = t == 0 ? log_pi : add(prior_side, log_pi);
    state_only = t == 0 ? kl_t : add(state_only, kl_t);
  }
  JointKlCheck out;
  out.lhs = sum(sub(posterior_side, prior_side)).value()(0, 0);
  out.rhs = sum(state_only).value()(0, 0);
  return out;
}

}  // namespace aime::imitate
