#include "aime/wm/elbo.hpp"

#include <cmath>

namespace aime::wm {

using namespace aime::diff;

Matrix ReplayNoise::next(Eigen::Index rows, Eigen::Index cols) {
  if (next_ >= draws_.size()) throw DomainError("ReplayNoise: stream exhausted");
  const Matrix& m = draws_[next_++];
  if (m.rows() != rows || m.cols() != cols) throw ShapeError("ReplayNoise: shape mismatch");
  return m;
}

namespace {

Gaussian stop_grad(const Gaussian& g) {
  return Gaussian(detach(g.mean), detach(g.stddev));
}

/// KL objective for one step (1 x B), honoring balancing and free nats.
Array kl_objective(const SSMConfig& cfg, const Gaussian& posterior, const Gaussian& prior) {
  Array kl;
  if (cfg.kl_balance == 0.5) {
    kl = kl_diag_gaussian(posterior, prior);
  } else {
    // Dreamer-style balancing: the value still equals the plain KL, the
    // gradient is split between prior and posterior sides.
    Array prior_side = kl_diag_gaussian(stop_grad(posterior), prior);
    Array post_side = kl_diag_gaussian(posterior, stop_grad(prior));
    kl = add(scale(prior_side, cfg.kl_balance), scale(post_side, 1.0 - cfg.kl_balance));
  }
  if (cfg.free_nats > 0.0) kl = clamp_min(kl, cfg.free_nats);
  return kl;
}

}  // namespace

ElboTerms elbo_terms(const SSMArrays& arrays, const SSMConfig& cfg, const std::vector<Array>& obs,
                     const std::vector<Array>& act, NoiseSource& noise) {
  if (obs.size() != act.size()) throw ShapeError("elbo: obs/act lengths differ");
  if (obs.empty()) throw ShapeError("elbo: empty sequence");
  Tape& tape = *obs[0].tape();
  const Eigen::Index batch = obs[0].cols();

  StateBelief belief = initial_belief(tape, cfg, batch);
  Array rec_sum, kl_sum;
  ElboTerms out;
  out.beliefs.reserve(obs.size());

  for (std::size_t t = 0; t < obs.size(); ++t) {
    Array feature = encode(arrays, cfg, obs[t]);
    Array step_noise = tape.constant(noise.next(cfg.stoch_size, batch));
    belief = posterior_step(arrays, cfg, belief, act[t], feature, step_noise);
    out.beliefs.push_back(belief);

    Gaussian dec = decode(arrays, cfg, belief.h, belief.s);
    Array rec_t;   // 1 x B
    Array kl_w;    // 1 x B weight for the KL term (beta-NLL coupling), unset when off
    if (cfg.beta_nll > 0.0 && cfg.decoder_var == SSMConfig::DecoderVar::learned) {
      // beta-NLL: weight each dimension's log-density by sg(sigma^(2 beta));
      // the KL term is reweighted by the mean weight to keep the balance.
      Array w = detach(vexp(scale(vlog(dec.stddev), 2.0 * cfg.beta_nll)));
      rec_t = colwise_sum(mul(w, gaussian_logpdf_elem(dec, obs[t])));
      kl_w = colwise_mean(w);
    } else {
      rec_t = gaussian_logpdf(dec, obs[t]);
    }

    Array kl_t = kl_objective(cfg, belief.posterior, belief.prior);
    if (kl_w.valid()) kl_t = mul(kl_t, kl_w);

    if (!rec_t.value().allFinite() || !kl_t.value().allFinite()) {
      throw NumericalError("elbo: non-finite objective term", static_cast<long>(t));
    }

    rec_sum = t == 0 ? rec_t : add(rec_sum, rec_t);
    kl_sum = t == 0 ? kl_t : add(kl_sum, kl_t);
  }

  Array neg_kl_sum = scale(neg(kl_sum), cfg.kl_scale);
  out.rec = scale(sum(rec_sum), 1.0 / static_cast<double>(batch));
  out.kl = scale(sum(neg_kl_sum), 1.0 / static_cast<double>(batch));
  out.total = add(out.rec, out.kl);
  out.per_sequence = add(rec_sum, neg_kl_sum);
  return out;
}

ElboValues elbo(const WorldModel& model, const Matrix& observations, const Matrix& actions,
                NoiseSource& noise) {
  const SSMConfig& cfg = model.config();
  if (observations.rows() != actions.rows()) {
    throw ShapeError("elbo: need one action row per observation row");
  }
  Tape tape;
  TapeBinding binding(tape, model.params(), false);
  SSMArrays arrays = bind_ssm(binding, cfg);

  std::vector<Array> obs, act;
  for (Eigen::Index t = 0; t < observations.rows(); ++t) {
    obs.push_back(tape.constant(observations.row(t).transpose()));
    act.push_back(tape.constant(actions.row(t).transpose()));
  }
  ElboTerms terms = elbo_terms(arrays, cfg, obs, act, noise);
  return ElboValues{terms.total.value()(0, 0), terms.rec.value()(0, 0), terms.kl.value()(0, 0)};
}

SampledElbo elbo_sampled(const WorldModel& model, const Matrix& observations,
                         const Matrix& actions, int samples, std::uint64_t seed) {
  const SSMConfig& cfg = model.config();
  if (samples < 2) throw DomainError("elbo_sampled: need at least 2 samples");
  Tape tape;
  TapeBinding binding(tape, model.params(), false);
  SSMArrays arrays = bind_ssm(binding, cfg);

  std::vector<Array> obs, act;
  for (Eigen::Index t = 0; t < observations.rows(); ++t) {
    obs.push_back(tape.constant(observations.row(t).transpose().replicate(1, samples)));
    act.push_back(tape.constant(actions.row(t).transpose().replicate(1, samples)));
  }
  SeededRng rng(derive_seed(seed, "elbo-noise"));
  GaussianNoise noise(rng);
  ElboTerms terms = elbo_terms(arrays, cfg, obs, act, noise);

  const auto& per_seq = terms.per_sequence.value();
  const double mean = per_seq.mean();
  const double var =
      (per_seq.array() - mean).square().sum() / static_cast<double>(samples - 1);
  SampledElbo out;
  out.mean = mean;
  out.stderr_ = std::sqrt(var / static_cast<double>(samples));
  out.samples = samples;
  return out;
}

}  // namespace aime::wm
