#include "aime/baselines/stacked.hpp"

#include <deque>

#include <json.hpp>

namespace aime::baselines {

using namespace aime::diff;

Matrix stacked_input(const data::Trajectory& tr, Eigen::Index t, int stack) {
  const Eigen::Index obs_dim = tr.observations.cols();
  Matrix out = Matrix::Zero(stack * obs_dim, 1);
  // Frames o_{t-k+1} .. o_t live at stored rows t-k .. t-1; earlier slots stay zero.
  for (int f = 0; f < stack; ++f) {
    const Eigen::Index row = t - 1 - f;
    if (row < 0) break;
    out.block((stack - 1 - f) * obs_dim, 0, obs_dim, 1) = tr.observations.row(row).transpose();
  }
  return out;
}

StackedObsPolicy::StackedObsPolicy(StackedPolicyConfig cfg, int obs_dim, int action_dim,
                                   std::uint64_t seed)
    : config_(cfg), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (cfg.stack < 1) throw DomainError("stacked policy: stack must be >= 1");
  SeededRng rng(derive_seed(seed, "stacked-policy-init"));
  init_mlp(params_, "bcpol",
           MlpSpec{input_dim(), 2 * action_dim,
                   std::vector<int>(static_cast<std::size_t>(cfg.layers), cfg.hidden)},
           rng, /*out_scale=*/0.0);
}

StackedObsPolicy::StackedObsPolicy(StackedPolicyConfig cfg, int obs_dim, int action_dim,
                                   ParamStore params)
    : config_(cfg), obs_dim_(obs_dim), action_dim_(action_dim), params_(std::move(params)) {}

MlpArrays StackedObsPolicy::bind(const TapeBinding& binding) const {
  return bind_mlp(binding, "bcpol");
}

TanhGaussian StackedObsPolicy::dist(const MlpArrays& arrays, const Array& stacked_obs) const {
  return tanh_gaussian_head(arrays, stacked_obs);
}

void StackedObsPolicy::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json meta;
  meta["kind"] = "stacked-policy";
  meta["stack"] = config_.stack;
  meta["hidden"] = config_.hidden;
  meta["layers"] = config_.layers;
  meta["obs_dim"] = obs_dim_;
  meta["action_dim"] = action_dim_;
  params_.save(path, meta);
}

StackedObsPolicy StackedObsPolicy::load(const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  ParamStore store = ParamStore::load(path, &header);
  const auto& meta = header.at("meta");
  if (meta.value("kind", std::string()) != "stacked-policy") {
    throw DatasetIoError(DataErrorCode::bad_manifest, "not a stacked-policy checkpoint");
  }
  StackedPolicyConfig cfg;
  cfg.stack = meta.at("stack").get<int>();
  cfg.hidden = meta.at("hidden").get<int>();
  cfg.layers = meta.at("layers").get<int>();
  return StackedObsPolicy(cfg, meta.at("obs_dim").get<int>(), meta.at("action_dim").get<int>(),
                          std::move(store));
}

namespace {

class StackedAdapter final : public data::RolloutPolicy {
 public:
  StackedAdapter(const StackedObsPolicy& policy, bool stochastic)
      : policy_(&policy), stochastic_(stochastic), rng_(0) {}

  void begin_episode(std::uint64_t episode_seed) override {
    rng_ = SeededRng(derive_seed(episode_seed, "stacked-action"));
    history_.clear();
    first_call_ = true;
  }

  env::Vector act(const env::Vector& observation, const env::Vector&) override {
    if (!first_call_) {
      history_.push_back(observation);
      if (static_cast<int>(history_.size()) > policy_->config().stack) history_.pop_front();
    }
    first_call_ = false;

    const int k = policy_->config().stack;
    const int d = policy_->obs_dim();
    Matrix input = Matrix::Zero(k * d, 1);
    for (std::size_t f = 0; f < history_.size(); ++f) {
      input.block((k - static_cast<int>(history_.size()) + static_cast<int>(f)) * d, 0, d, 1) =
          history_[f];
    }

    Tape tape;
    TapeBinding bind(tape, policy_->params(), false);
    MlpArrays arrays = policy_->bind(bind);
    TanhGaussian pi = policy_->dist(arrays, tape.constant(input));
    Matrix action;
    if (stochastic_) {
      Matrix noise(policy_->action_dim(), 1);
      for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, 0) = rng_.normal();
      action = pi.sample(tape.constant(noise)).value();
    } else {
      action = pi.mean_action().value();
    }
    return env::Vector(action.col(0));
  }

 private:
  const StackedObsPolicy* policy_;
  bool stochastic_;
  SeededRng rng_;
  std::deque<env::Vector> history_;
  bool first_call_ = true;
};

}  // namespace

std::unique_ptr<data::RolloutPolicy> stacked_policy_adapter(const StackedObsPolicy& policy,
                                                            bool stochastic) {
  return std::make_unique<StackedAdapter>(policy, stochastic);
}

std::vector<double> deploy_stacked_policy(const StackedObsPolicy& policy, const env::Env& env,
                                          const env::Task& task, int episodes, std::uint64_t seed,
                                          bool stochastic) {
  auto adapter = stacked_policy_adapter(policy, stochastic);
  data::Dataset rollouts = data::collect(env, task, *adapter, episodes, seed);
  std::vector<double> returns;
  returns.reserve(rollouts.size());
  for (const data::Trajectory& tr : rollouts.trajectories()) {
    returns.push_back(tr.episode_return());
  }
  return returns;
}

}  // namespace aime::baselines
