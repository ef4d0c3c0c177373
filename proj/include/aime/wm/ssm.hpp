#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "aime/diff/nets.hpp"

namespace aime::wm {

using diff::Array;
using diff::Gaussian;
using diff::Matrix;
using diff::Tape;
using diff::TapeBinding;

/// Latent state-space model layout and objective options.
///
/// The latent state splits into a deterministic path h (GRU) and a stochastic
/// path s (diagonal Gaussian), with
///   feature   z_t     = f(o_t)                    (identity or MLP; phi)
///   determin. h_t     = GRU(concat(s_{t-1}, a_{t-1}), h_{t-1})   (theta)
///   prior     s_t     ~ N(head(h_t))                              (theta)
///   posterior s_t     ~ N(head(concat(h_t, z_t)))                 (phi)
///   decoder   o_t     ~ N(head(concat(h_t, s_t)))                 (theta)
/// The objective couplings (free nats, KL balancing, KL scaling, beta-NLL)
/// all default to off; they are exposed because harder embodiments benefit
/// from them while a frozen model at imitation time does not.
struct SSMConfig {
  int obs_dim = 0;
  int action_dim = 0;
  int det_size = 64;    // H
  int stoch_size = 16;  // Z
  int hidden = 64;      // MLP width for every head
  int hidden_layers = 2;

  enum class Encoder { identity, mlp };
  Encoder encoder = Encoder::identity;
  int encoder_out = 0;  // feature size in mlp mode (0 -> hidden)

  enum class DecoderVar { fixed_one, learned };
  DecoderVar decoder_var = DecoderVar::fixed_one;

  double beta_nll = 0.0;     // [0,1]; 0 = off
  double free_nats = 0.0;    // >= 0; 0 = off
  double kl_balance = 0.5;   // [0,1]; 0.5 = off (plain KL)
  double kl_scale = 1.0;     // > 0
  double min_std = 1e-3;

  int feature_dim() const {
    return encoder == Encoder::identity ? obs_dim : (encoder_out > 0 ? encoder_out : hidden);
  }
  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const SSMConfig& cfg);
void from_json(const nlohmann::ordered_json& j, SSMConfig& cfg);

/// Parameters phi (inference: encoder, posterior head) live under "phi.",
/// parameters theta (generative: GRU, prior head, decoder) under "theta.".
/// The partition is exhaustive and disjoint by construction.
class WorldModel {
 public:
  WorldModel(SSMConfig cfg, std::uint64_t init_seed);

  const SSMConfig& config() const { return config_; }
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }

  static bool is_inference_param(const std::string& name) { return name.rfind("phi.", 0) == 0; }
  static bool is_generative_param(const std::string& name) {
    return name.rfind("theta.", 0) == 0;
  }

  std::string params_hash() const { return params_.sha256(); }

  void save(const std::filesystem::path& path) const;
  static WorldModel load(const std::filesystem::path& path);

 private:
  WorldModel(SSMConfig cfg, diff::ParamStore params);
  SSMConfig config_;
  diff::ParamStore params_;
};

/// Tape-bound view of the model parameters for one forward build.
struct SSMArrays {
  diff::MlpArrays enc;  // empty in identity mode
  diff::MlpArrays post;
  diff::MlpArrays prior;
  diff::MlpArrays dec;
  diff::GruArrays gru;
};

SSMArrays bind_ssm(const TapeBinding& binding, const SSMConfig& cfg);

/// Latent state at one time step (batched; one column per sequence).
struct StateBelief {
  Array h;
  Array s;
  Gaussian posterior;
  Gaussian prior;
};

/// h_0 = 0, s_0 = 0. The attached unit Gaussians are placeholders; step 0 has
/// no posterior or prior.
StateBelief initial_belief(Tape& tape, const SSMConfig& cfg, Eigen::Index batch);

/// Observation feature z_t; the identity encoder returns its input unchanged.
Array encode(const SSMArrays& arrays, const SSMConfig& cfg, const Array& obs);

/// (h_t, prior over s_t) from the previous belief and action.
std::pair<Array, Gaussian> prior_step(const SSMArrays& arrays, const SSMConfig& cfg,
                                      const StateBelief& prev, const Array& action_prev);

/// Full filtering step: prior via prior_step, posterior from (h_t, z_t),
/// s_t = rsample(posterior, noise).
StateBelief posterior_step(const SSMArrays& arrays, const SSMConfig& cfg, const StateBelief& prev,
                           const Array& action_prev, const Array& feature, const Array& noise);

/// Observation distribution from the latent state.
Gaussian decode(const SSMArrays& arrays, const SSMConfig& cfg, const Array& h, const Array& s);

/// Autoregressive posterior filtering from the zero belief; obs[t] pairs with
/// act[t] (the action applied right before that observation).
std::vector<StateBelief> filter_sequence(const SSMArrays& arrays, const SSMConfig& cfg,
                                         const std::vector<Array>& obs,
                                         const std::vector<Array>& act,
                                         const std::vector<Array>& noise);

}  // namespace aime::wm
