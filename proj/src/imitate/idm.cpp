#include "aime/imitate/idm.hpp"

#include <cmath>

#include "aime/diff/adam.hpp"

namespace aime::imitate {

using namespace aime::diff;
using wm::SSMArrays;
using wm::SSMConfig;
using wm::StateBelief;

LatentIdm::LatentIdm(IdmConfig cfg, int det_size, int stoch_size, int feature_dim, int action_dim,
                     std::uint64_t init_seed)
    : config_(cfg), action_dim_(action_dim) {
  SeededRng rng(derive_seed(init_seed, "idm-init"));
  init_mlp(params_, "idm",
           MlpSpec{det_size + stoch_size + feature_dim, 2 * action_dim,
                   std::vector<int>(static_cast<std::size_t>(cfg.layers), cfg.hidden)},
           rng);
}

MlpArrays LatentIdm::bind(const TapeBinding& binding) const { return bind_mlp(binding, "idm"); }

TanhGaussian LatentIdm::dist(const MlpArrays& arrays, const Array& h, const Array& s,
                             const Array& next_feature) const {
  // Gradients must not leak from the IDM head into the filter.
  return tanh_gaussian_head(arrays, vcat(detach(h), detach(s), detach(next_feature)));
}

namespace {

/// Filters a chunk with true actions and accumulates the IDM NLL of those
/// actions, pairing the belief carried into step t with f(o_t) to predict the
/// action applied at t (t = 0 pairs the zero belief with the first feature).
Array idm_chunk_nll(const SSMArrays& arrays, const SSMConfig& mcfg, const MlpArrays& idm_arrays,
                    const LatentIdm& idm, const std::vector<Array>& obs,
                    const std::vector<Array>& act, wm::NoiseSource& latent_noise) {
  Tape& tape = *obs[0].tape();
  const Eigen::Index batch = obs[0].cols();
  StateBelief belief = wm::initial_belief(tape, mcfg, batch);
  Array nll;
  for (std::size_t t = 0; t < obs.size(); ++t) {
    Array feature = wm::encode(arrays, mcfg, obs[t]);
    TanhGaussian pred = idm.dist(idm_arrays, belief.h, belief.s, feature);
    Array lp = pred.log_prob(act[t]);
    nll = t == 0 ? neg(lp) : sub(nll, lp);
    belief = wm::posterior_step(arrays, mcfg, belief, act[t], feature,
                                tape.constant(latent_noise.next(mcfg.stoch_size, batch)));
  }
  return scale(sum(nll), 1.0 / static_cast<double>(batch));
}

std::vector<Array> to_arrays(Tape& tape, const std::vector<Matrix>& mats) {
  std::vector<Array> out;
  out.reserve(mats.size());
  for (const Matrix& m : mats) out.push_back(tape.constant(m));
  return out;
}

}  // namespace

IdmResult train_idm_head(const wm::WorldModel& model, const data::Dataset& body,
                         const IdmConfig& cfg, std::uint64_t seed) {
  if (!body.has_actions()) throw DomainError("train_idm_head: embodiment data must have actions");
  const SSMConfig& mcfg = model.config();
  const std::string frozen_hash = model.params_hash();

  LatentIdm idm(cfg, mcfg.det_size, mcfg.stoch_size, mcfg.feature_dim(), mcfg.action_dim,
                derive_seed(seed, "idm"));
  AdamOptimizer optimizer(idm.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  SeededRng sample_rng(derive_seed(seed, "idm-sample"));
  SeededRng noise_rng(derive_seed(seed, "idm-noise"));

  std::vector<IdmTrainLog> log;
  Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    IdmTrainLog entry;
    entry.epoch = epoch;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      tape.clear();
      TapeBinding model_bind(tape, model.params(), false);
      TapeBinding idm_bind(tape, idm.params(), true);
      SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
      MlpArrays idm_arrays = idm.bind(idm_bind);

      data::ChunkBatch chunk =
          data::sample_chunks(body, cfg.batch, cfg.chunk_len, sample_rng, true);
      std::vector<Array> obs = to_arrays(tape, chunk.obs);
      std::vector<Array> act = to_arrays(tape, chunk.act);
      wm::GaussianNoise latent_noise(noise_rng);
      Array nll = idm_chunk_nll(arrays, mcfg, idm_arrays, idm, obs, act, latent_noise);
      if (!std::isfinite(nll.value()(0, 0))) {
        throw TrainingDiverged("train_idm_head: loss diverged", epoch, step);
      }
      tape.backward(nll);
      optimizer.step(idm_bind);
      entry.nll += nll.value()(0, 0);
    }
    entry.nll /= static_cast<double>(cfg.steps_per_epoch);
    log.push_back(entry);
  }

  if (model.params_hash() != frozen_hash) {
    throw FrozenViolation("train_idm_head: world-model parameters changed");
  }
  return IdmResult{std::move(idm), std::move(log)};
}

double idm_log_likelihood(const wm::WorldModel& model, const LatentIdm& idm,
                          const data::Dataset& body, int chunks, Eigen::Index chunk_len,
                          std::uint64_t seed) {
  const SSMConfig& mcfg = model.config();
  SeededRng sample_rng(derive_seed(seed, "idm-eval-sample"));
  SeededRng noise_rng(derive_seed(seed, "idm-eval-noise"));
  Tape tape;
  TapeBinding model_bind(tape, model.params(), false);
  TapeBinding idm_bind(tape, idm.params(), false);
  SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
  MlpArrays idm_arrays = idm.bind(idm_bind);

  data::ChunkBatch chunk = data::sample_chunks(body, chunks, chunk_len, sample_rng, true);
  std::vector<Array> obs = to_arrays(tape, chunk.obs);
  std::vector<Array> act = to_arrays(tape, chunk.act);
  wm::GaussianNoise latent_noise(noise_rng);
  Array nll = idm_chunk_nll(arrays, mcfg, idm_arrays, idm, obs, act, latent_noise);
  return -nll.value()(0, 0);
}

Phase2Result aime_idm_phase2(const wm::WorldModel& model, const LatentIdm& idm,
                             const data::Dataset& demo, const ImitationConfig& cfg,
                             std::uint64_t seed, const data::Dataset* eval_actions) {
  if (demo.has_actions() || demo.role() != data::DatasetRole::demonstration) {
    throw DomainError("aime_idm_phase2: demo dataset must be action-free demonstration data");
  }
  const SSMConfig& mcfg = model.config();
  const std::string frozen_model = model.params_hash();
  const std::string frozen_idm = idm.params().sha256();

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
      TapeBinding idm_bind(tape, idm.params(), false);
      TapeBinding policy_bind(tape, policy.params(), true);
      SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
      MlpArrays idm_arrays = idm.bind(idm_bind);
      MlpArrays pol = policy.bind(policy_bind);

      data::ChunkBatch chunk =
          data::sample_chunks(demo, cfg.batch, cfg.chunk_len, sample_rng, false);
      std::vector<Array> obs = to_arrays(tape, chunk.obs);
      wm::GaussianNoise latent_noise(latent_rng);
      wm::GaussianNoise action_noise(action_rng);

      StateBelief belief = wm::initial_belief(tape, mcfg, cfg.batch);
      Array rec_sum, kl_sum, idm_kl_sum;
      for (Eigen::Index t = 0; t < chunk.length(); ++t) {
        Array feature = wm::encode(arrays, mcfg, obs[static_cast<std::size_t>(t)]);
        TanhGaussian q_idm = idm.dist(idm_arrays, belief.h, belief.s, feature);
        TanhGaussian pi = policy.dist(pol, belief.h, belief.s);
        // Rollout actions come from the IDM posterior; the policy is the
        // prior over actions and learns through the divergence below.
        Array action =
            q_idm.sample(tape.constant(action_noise.next(idm.action_dim(), cfg.batch)));
        Array idm_kl_t = kl_tanh_gaussian(q_idm, pi);
        belief = wm::posterior_step(arrays, mcfg, belief, action, feature,
                                    tape.constant(latent_noise.next(mcfg.stoch_size, cfg.batch)));
        Gaussian dec = wm::decode(arrays, mcfg, belief.h, belief.s);
        Array rec_t = gaussian_logpdf(dec, obs[static_cast<std::size_t>(t)]);
        Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);

        rec_sum = t == 0 ? rec_t : add(rec_sum, rec_t);
        kl_sum = t == 0 ? kl_t : add(kl_sum, kl_t);
        idm_kl_sum = t == 0 ? idm_kl_t : add(idm_kl_sum, idm_kl_t);
      }
      const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
      Array rec = scale(sum(rec_sum), inv_batch);
      Array kl = scale(sum(neg(kl_sum)), inv_batch);
      Array idm_term = scale(sum(neg(idm_kl_sum)), inv_batch);
      Array objective = add(add(rec, kl), idm_term);
      if (!std::isfinite(objective.value()(0, 0))) {
        throw TrainingDiverged("aime_idm_phase2: objective diverged", epoch, step);
      }
      tape.backward(neg(objective));
      optimizer.step(policy_bind);

      stats.j += objective.value()(0, 0);
      stats.j_rec += rec.value()(0, 0);
      stats.j_kl += kl.value()(0, 0);
    }
    const double inv = 1.0 / static_cast<double>(cfg.steps_per_epoch);
    stats.j *= inv;
    stats.j_rec *= inv;
    stats.j_kl *= inv;
    if (eval_actions) stats.action_mse = policy_action_mse(model, policy, *eval_actions);
    log.push_back(stats);
  }

  if (model.params_hash() != frozen_model) {
    throw FrozenViolation("aime_idm_phase2: world-model parameters changed");
  }
  if (idm.params().sha256() != frozen_idm) {
    throw FrozenViolation("aime_idm_phase2: IDM parameters changed");
  }
  return Phase2Result{std::move(policy), std::move(log)};
}

}  // namespace aime::imitate
