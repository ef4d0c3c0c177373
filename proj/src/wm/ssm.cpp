#include "aime/wm/ssm.hpp"

namespace aime::wm {

using namespace aime::diff;

void SSMConfig::validate() const {
  if (obs_dim < 1 || action_dim < 1) throw DomainError("ssm: obs/action dims must be positive");
  if (det_size < 1 || stoch_size < 1) throw DomainError("ssm: latent sizes must be >= 1");
  if (hidden < 1 || hidden_layers < 0) throw DomainError("ssm: bad hidden layout");
  if (beta_nll < 0.0 || beta_nll > 1.0) throw DomainError("ssm: beta_nll must be in [0,1]");
  if (free_nats < 0.0) throw DomainError("ssm: free_nats must be >= 0");
  if (kl_balance < 0.0 || kl_balance > 1.0) throw DomainError("ssm: kl_balance must be in [0,1]");
  if (kl_scale <= 0.0) throw DomainError("ssm: kl_scale must be > 0");
  if (min_std <= 0.0) throw DomainError("ssm: min_std must be > 0");
}

void to_json(nlohmann::ordered_json& j, const SSMConfig& cfg) {
  j = nlohmann::ordered_json{
      {"obs_dim", cfg.obs_dim},
      {"action_dim", cfg.action_dim},
      {"det_size", cfg.det_size},
      {"stoch_size", cfg.stoch_size},
      {"hidden", cfg.hidden},
      {"hidden_layers", cfg.hidden_layers},
      {"encoder", cfg.encoder == SSMConfig::Encoder::identity ? "identity" : "mlp"},
      {"encoder_out", cfg.encoder_out},
      {"decoder_var", cfg.decoder_var == SSMConfig::DecoderVar::fixed_one ? "fixed-1" : "learned"},
      {"beta_nll", cfg.beta_nll},
      {"free_nats", cfg.free_nats},
      {"kl_balance", cfg.kl_balance},
      {"kl_scale", cfg.kl_scale},
      {"min_std", cfg.min_std},
  };
}

void from_json(const nlohmann::ordered_json& j, SSMConfig& cfg) {
  cfg.obs_dim = j.value("obs_dim", cfg.obs_dim);
  cfg.action_dim = j.value("action_dim", cfg.action_dim);
  cfg.det_size = j.value("det_size", cfg.det_size);
  cfg.stoch_size = j.value("stoch_size", cfg.stoch_size);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.hidden_layers = j.value("hidden_layers", cfg.hidden_layers);
  const std::string enc = j.value("encoder", std::string("identity"));
  if (enc == "identity") {
    cfg.encoder = SSMConfig::Encoder::identity;
  } else if (enc == "mlp") {
    cfg.encoder = SSMConfig::Encoder::mlp;
  } else {
    throw DomainError("ssm: unknown encoder '" + enc + "'");
  }
  cfg.encoder_out = j.value("encoder_out", cfg.encoder_out);
  const std::string dv = j.value("decoder_var", std::string("fixed-1"));
  if (dv == "fixed-1") {
    cfg.decoder_var = SSMConfig::DecoderVar::fixed_one;
  } else if (dv == "learned") {
    cfg.decoder_var = SSMConfig::DecoderVar::learned;
  } else {
    throw DomainError("ssm: unknown decoder_var '" + dv + "'");
  }
  cfg.beta_nll = j.value("beta_nll", cfg.beta_nll);
  cfg.free_nats = j.value("free_nats", cfg.free_nats);
  cfg.kl_balance = j.value("kl_balance", cfg.kl_balance);
  cfg.kl_scale = j.value("kl_scale", cfg.kl_scale);
  cfg.min_std = j.value("min_std", cfg.min_std);
}

namespace {
std::vector<int> hidden_stack(const SSMConfig& cfg) {
  return std::vector<int>(static_cast<std::size_t>(cfg.hidden_layers), cfg.hidden);
}
}  // namespace

WorldModel::WorldModel(SSMConfig cfg, std::uint64_t init_seed) : config_(cfg) {
  config_.validate();
  SeededRng rng(derive_seed(init_seed, "wm-init"));
  if (config_.encoder == SSMConfig::Encoder::mlp) {
    init_mlp(params_, "phi.enc", MlpSpec{config_.obs_dim, config_.feature_dim(), hidden_stack(config_)},
             rng);
  }
  init_mlp(params_, "phi.post",
           MlpSpec{config_.det_size + config_.feature_dim(), 2 * config_.stoch_size,
                   hidden_stack(config_)},
           rng);
  init_gru(params_, "theta.gru",
           GruSpec{config_.stoch_size + config_.action_dim, config_.det_size}, rng);
  init_mlp(params_, "theta.prior",
           MlpSpec{config_.det_size, 2 * config_.stoch_size, hidden_stack(config_)}, rng);
  const int dec_out = config_.decoder_var == SSMConfig::DecoderVar::learned
                          ? 2 * config_.obs_dim
                          : config_.obs_dim;
  init_mlp(params_, "theta.dec",
           MlpSpec{config_.det_size + config_.stoch_size, dec_out, hidden_stack(config_)}, rng);
}

WorldModel::WorldModel(SSMConfig cfg, diff::ParamStore params)
    : config_(cfg), params_(std::move(params)) {
  config_.validate();
}

void WorldModel::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json meta;
  nlohmann::ordered_json cfg_json;
  to_json(cfg_json, config_);
  meta["kind"] = "world-model";
  meta["config"] = cfg_json;
  params_.save(path, meta);
}

WorldModel WorldModel::load(const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  diff::ParamStore store = diff::ParamStore::load(path, &header);
  const auto& meta = header.at("meta");
  if (meta.value("kind", std::string()) != "world-model") {
    throw DatasetIoError(DataErrorCode::bad_manifest, "not a world-model checkpoint");
  }
  SSMConfig cfg;
  from_json(meta.at("config"), cfg);
  return WorldModel(cfg, std::move(store));
}

SSMArrays bind_ssm(const TapeBinding& binding, const SSMConfig& cfg) {
  SSMArrays arrays;
  if (cfg.encoder == SSMConfig::Encoder::mlp) arrays.enc = bind_mlp(binding, "phi.enc");
  arrays.post = bind_mlp(binding, "phi.post");
  arrays.prior = bind_mlp(binding, "theta.prior");
  arrays.dec = bind_mlp(binding, "theta.dec");
  arrays.gru = bind_gru(binding, "theta.gru");
  return arrays;
}

StateBelief initial_belief(Tape& tape, const SSMConfig& cfg, Eigen::Index batch) {
  StateBelief b;
  b.h = tape.constant(Matrix::Zero(cfg.det_size, batch));
  b.s = tape.constant(Matrix::Zero(cfg.stoch_size, batch));
  Array ones = tape.constant(Matrix::Ones(cfg.stoch_size, batch));
  Array zeros = tape.constant(Matrix::Zero(cfg.stoch_size, batch));
  b.posterior = Gaussian(zeros, ones);
  b.prior = Gaussian(zeros, ones);
  return b;
}

Array encode(const SSMArrays& arrays, const SSMConfig& cfg, const Array& obs) {
  diff::detail::require(obs.rows() == cfg.obs_dim, "encode: observation dimension mismatch");
  if (cfg.encoder == SSMConfig::Encoder::identity) return obs;
  return mlp_forward(arrays.enc, obs);
}

std::pair<Array, Gaussian> prior_step(const SSMArrays& arrays, const SSMConfig& cfg,
                                      const StateBelief& prev, const Array& action_prev) {
  diff::detail::require(action_prev.rows() == cfg.action_dim, "prior_step: action dim mismatch");
  Array input = vcat(prev.s, action_prev);
  Array h = gru_step(arrays.gru, input, prev.h);
  Gaussian prior = gaussian_head(arrays.prior, h, cfg.min_std);
  return {h, prior};
}

StateBelief posterior_step(const SSMArrays& arrays, const SSMConfig& cfg, const StateBelief& prev,
                           const Array& action_prev, const Array& feature, const Array& noise) {
  auto [h, prior] = prior_step(arrays, cfg, prev, action_prev);
  diff::detail::require(feature.rows() == cfg.feature_dim(),
                        "posterior_step: feature dim mismatch");
  Gaussian posterior = gaussian_head(arrays.post, vcat(h, feature), cfg.min_std);
  StateBelief next;
  next.h = h;
  next.s = rsample(posterior, noise);
  next.posterior = posterior;
  next.prior = prior;
  return next;
}

Gaussian decode(const SSMArrays& arrays, const SSMConfig& cfg, const Array& h, const Array& s) {
  Array input = vcat(h, s);
  if (cfg.decoder_var == SSMConfig::DecoderVar::learned) {
    return gaussian_head(arrays.dec, input, cfg.min_std);
  }
  Array mean = mlp_forward(arrays.dec, input);
  Array ones = mean.tape()->constant(Matrix::Ones(mean.rows(), mean.cols()));
  return Gaussian(mean, ones);
}

std::vector<StateBelief> filter_sequence(const SSMArrays& arrays, const SSMConfig& cfg,
                                         const std::vector<Array>& obs,
                                         const std::vector<Array>& act,
                                         const std::vector<Array>& noise) {
  if (obs.size() != act.size() || obs.size() != noise.size()) {
    throw ShapeError("filter_sequence: obs/act/noise lengths differ");
  }
  if (obs.empty()) throw ShapeError("filter_sequence: empty sequence");
  std::vector<StateBelief> beliefs;
  beliefs.reserve(obs.size());
  StateBelief belief = initial_belief(*obs[0].tape(), cfg, obs[0].cols());
  for (std::size_t t = 0; t < obs.size(); ++t) {
    belief = posterior_step(arrays, cfg, belief, act[t], encode(arrays, cfg, obs[t]), noise[t]);
    beliefs.push_back(belief);
  }
  return beliefs;
}

}  // namespace aime::wm
