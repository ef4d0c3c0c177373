#include "aime/imitate/policy.hpp"

#include <json.hpp>

namespace aime::imitate {

using namespace aime::diff;

LatentPolicy::LatentPolicy(PolicyConfig cfg, int det_size, int stoch_size, int action_dim,
                           std::uint64_t init_seed)
    : config_(cfg), det_size_(det_size), stoch_size_(stoch_size), action_dim_(action_dim) {
  if (det_size < 1 || stoch_size < 1 || action_dim < 1) {
    throw DomainError("policy: bad dimensions");
  }
  SeededRng rng(derive_seed(init_seed, "policy-init"));
  init_mlp(params_, "policy",
           MlpSpec{det_size + stoch_size, 2 * action_dim,
                   std::vector<int>(static_cast<std::size_t>(cfg.layers), cfg.hidden)},
           rng, /*out_scale=*/0.0);
}

LatentPolicy::LatentPolicy(PolicyConfig cfg, int det_size, int stoch_size, int action_dim,
                           diff::ParamStore params)
    : config_(cfg),
      det_size_(det_size),
      stoch_size_(stoch_size),
      action_dim_(action_dim),
      params_(std::move(params)) {}

MlpArrays LatentPolicy::bind(const TapeBinding& binding) const {
  return bind_mlp(binding, "policy");
}

TanhGaussian LatentPolicy::dist(const MlpArrays& arrays, const Array& h, const Array& s) const {
  return tanh_gaussian_head(arrays, vcat(h, s));
}

void LatentPolicy::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json meta;
  meta["kind"] = "policy";
  meta["hidden"] = config_.hidden;
  meta["layers"] = config_.layers;
  meta["det_size"] = det_size_;
  meta["stoch_size"] = stoch_size_;
  meta["action_dim"] = action_dim_;
  params_.save(path, meta);
}

LatentPolicy LatentPolicy::load(const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  ParamStore store = ParamStore::load(path, &header);
  const auto& meta = header.at("meta");
  if (meta.value("kind", std::string()) != "policy") {
    throw DatasetIoError(DataErrorCode::bad_manifest, "not a policy checkpoint");
  }
  PolicyConfig cfg;
  cfg.hidden = meta.at("hidden").get<int>();
  cfg.layers = meta.at("layers").get<int>();
  return LatentPolicy(cfg, meta.at("det_size").get<int>(), meta.at("stoch_size").get<int>(),
                      meta.at("action_dim").get<int>(), std::move(store));
}

}  // namespace aime::imitate
