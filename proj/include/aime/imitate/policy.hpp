#pragma once

#include <filesystem>

#include "aime/diff/nets.hpp"

namespace aime::imitate {

using diff::Array;
using diff::Matrix;
using diff::TanhGaussian;
using diff::TapeBinding;

struct PolicyConfig {
  int hidden = 64;
  int layers = 2;
};

/// pi(a | h, s): tanh-Gaussian over actions from the latent state. The output
/// layer is zero-initialized so a fresh policy acts near 0; reusing trained
/// policies as initialization is deliberately unsupported.
class LatentPolicy {
 public:
  LatentPolicy(PolicyConfig cfg, int det_size, int stoch_size, int action_dim,
               std::uint64_t init_seed);

  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  const PolicyConfig& config() const { return config_; }
  int action_dim() const { return action_dim_; }
  int det_size() const { return det_size_; }
  int stoch_size() const { return stoch_size_; }

  diff::MlpArrays bind(const TapeBinding& binding) const;
  TanhGaussian dist(const diff::MlpArrays& arrays, const Array& h, const Array& s) const;

  std::string params_hash() const { return params_.sha256(); }
  void save(const std::filesystem::path& path) const;
  static LatentPolicy load(const std::filesystem::path& path);

 private:
  LatentPolicy(PolicyConfig cfg, int det_size, int stoch_size, int action_dim,
               diff::ParamStore params);
  PolicyConfig config_;
  int det_size_;
  int stoch_size_;
  int action_dim_;
  diff::ParamStore params_;
};

}  // namespace aime::imitate
