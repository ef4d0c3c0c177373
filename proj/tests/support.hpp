#pragma once

// Shared oracle constructions for the unit and acceptance suites.

#include <cmath>

#include "aime/data/collect.hpp"
#include "aime/env/lingauss.hpp"
#include "aime/wm/ssm.hpp"

namespace aime::testing {

/// Builds a world model whose generative path reproduces a noiseless
/// linear-Gaussian system exactly (up to the tanh linearization error of the
/// recurrent cell, which is O(scale^2) relative). Construction:
///   - candidate gate: h' ~ tanh(scale*B a + A h) with h = scale * x, via
///     zero reset-gate parameters (r = 0.5) and candidate weights
///     [0 | scale*B], 2A;
///   - update gate bias -30 so h' keeps the candidate;
///   - prior and posterior heads are the constant N(0, 1) (zero weights,
///     matched biases), which makes the divergence term exactly zero and the
///     stochastic path pure noise;
///   - decoder reads h only: o = (C / scale) h, unit variance.
/// The sequence objective then peaks where the reconstruction matches, i.e.
/// at the true action sequence when B is invertible.
inline wm::WorldModel exact_lingauss_model(const env::LinGaussParams& params,
                                           double latent_scale = 0.05) {
  const int n = static_cast<int>(params.a.rows());
  const int m = static_cast<int>(params.b.cols());
  const int p = static_cast<int>(params.c.rows());

  wm::SSMConfig cfg;
  cfg.obs_dim = p;
  cfg.action_dim = m;
  cfg.det_size = n;
  cfg.stoch_size = 2;
  cfg.hidden_layers = 0;  // all heads are single linear maps
  cfg.encoder = wm::SSMConfig::Encoder::identity;
  cfg.decoder_var = wm::SSMConfig::DecoderVar::fixed_one;

  wm::WorldModel model(cfg, 0);
  auto& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) store.value(i).setZero();

  // GRU gate rows: [reset; update; candidate], inputs [s (stoch) | action].
  Eigen::MatrixXd wx = Eigen::MatrixXd::Zero(3 * n, cfg.stoch_size + m);
  wx.block(2 * n, cfg.stoch_size, n, m) = latent_scale * params.b;
  store.at("theta.gru.wx") = wx;
  Eigen::MatrixXd wh = Eigen::MatrixXd::Zero(3 * n, n);
  wh.block(2 * n, 0, n, n) = 2.0 * params.a;  // halved by the r = 0.5 gate
  store.at("theta.gru.wh") = wh;
  Eigen::MatrixXd bx = Eigen::MatrixXd::Zero(3 * n, 1);
  bx.block(n, 0, n, 1).setConstant(-30.0);  // update gate -> 0
  store.at("theta.gru.bx") = bx;

  // Unit-stddev heads: softplus(c) + min_std = 1.
  const double raw_unit_std = std::log(std::expm1(1.0 - cfg.min_std));
  store.at("theta.prior.b0").bottomRows(cfg.stoch_size).setConstant(raw_unit_std);
  store.at("phi.post.b0").bottomRows(cfg.stoch_size).setConstant(raw_unit_std);

  // Decoder reads the deterministic path only.
  Eigen::MatrixXd dec = Eigen::MatrixXd::Zero(p, n + cfg.stoch_size);
  dec.leftCols(n) = params.c / latent_scale;
  store.at("theta.dec.w0") = dec;
  return model;
}

/// A model whose decoder ignores the latent state entirely: the sequence
/// objective is flat in the actions.
inline wm::WorldModel action_blind_model(int obs_dim, int action_dim) {
  wm::SSMConfig cfg;
  cfg.obs_dim = obs_dim;
  cfg.action_dim = action_dim;
  cfg.det_size = 4;
  cfg.stoch_size = 2;
  cfg.hidden_layers = 0;
  wm::WorldModel model(cfg, 0);
  auto& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) store.value(i).setZero();
  const double raw_unit_std = std::log(std::expm1(1.0 - cfg.min_std));
  store.at("theta.prior.b0").bottomRows(cfg.stoch_size).setConstant(raw_unit_std);
  store.at("phi.post.b0").bottomRows(cfg.stoch_size).setConstant(raw_unit_std);
  return model;
}

/// Rolls the noiseless system with the task expert and returns the dataset
/// (actions retained; strip for demos).
inline data::Dataset collect_lingauss_expert(const env::LinGaussEnv& env, int episodes,
                                             std::uint64_t seed) {
  env::Task task = env.task("regulate");
  auto policy = data::expert_policy(task);
  return data::collect(env, task, *policy, episodes, seed);
}

}  // namespace aime::testing
