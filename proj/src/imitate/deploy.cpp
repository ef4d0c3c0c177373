#include "aime/imitate/deploy.hpp"

#include <cmath>

namespace aime::imitate {

using namespace aime::diff;
using wm::SSMArrays;
using wm::SSMConfig;
using wm::StateBelief;

namespace {

class LatentPolicyAdapter final : public data::RolloutPolicy {
 public:
  LatentPolicyAdapter(const wm::WorldModel& model, const LatentPolicy& policy, bool stochastic)
      : model_(&model), policy_(&policy), stochastic_(stochastic), action_rng_(0) {}

  void begin_episode(std::uint64_t episode_seed) override {
    action_rng_ = SeededRng(derive_seed(episode_seed, "policy-action"));
    tape_.clear();
    model_bind_.emplace(tape_, model_->params(), false);
    policy_bind_.emplace(tape_, policy_->params(), false);
    arrays_ = wm::bind_ssm(*model_bind_, model_->config());
    policy_arrays_ = policy_->bind(*policy_bind_);
    belief_ = wm::initial_belief(tape_, model_->config(), 1);
    have_prev_action_ = false;
  }

  env::Vector act(const env::Vector& observation, const env::Vector&) override {
    const SSMConfig& cfg = model_->config();
    if (have_prev_action_) {
      // Fold the newest observation and the action that produced it into the
      // belief (mean-path update keeps evaluation deterministic).
      Array obs = tape_.constant(Matrix(observation));
      belief_ = wm::posterior_step(arrays_, cfg, belief_, tape_.constant(prev_action_),
                                   wm::encode(arrays_, cfg, obs),
                                   tape_.constant(Matrix::Zero(cfg.stoch_size, 1)));
    }
    TanhGaussian pi = policy_->dist(policy_arrays_, belief_.h, belief_.s);
    Matrix action;
    if (stochastic_) {
      Matrix noise(policy_->action_dim(), 1);
      for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, 0) = action_rng_.normal();
      action = pi.sample(tape_.constant(noise)).value();
    } else {
      action = pi.mean_action().value();
    }
    prev_action_ = action;
    have_prev_action_ = true;
    return env::Vector(action.col(0));
  }

 private:
  const wm::WorldModel* model_;
  const LatentPolicy* policy_;
  bool stochastic_;
  SeededRng action_rng_;
  Tape tape_;
  std::optional<TapeBinding> model_bind_;
  std::optional<TapeBinding> policy_bind_;
  SSMArrays arrays_;
  MlpArrays policy_arrays_;
  StateBelief belief_;
  Matrix prev_action_;
  bool have_prev_action_ = false;
};

}  // namespace

std::unique_ptr<data::RolloutPolicy> latent_policy_adapter(const wm::WorldModel& model,
                                                           const LatentPolicy& policy,
                                                           bool stochastic) {
  return std::make_unique<LatentPolicyAdapter>(model, policy, stochastic);
}

std::vector<double> deploy_policy(const wm::WorldModel& model, const LatentPolicy& policy,
                                  const env::Env& env, const env::Task& task, int episodes,
                                  std::uint64_t seed, bool stochastic) {
  auto adapter = latent_policy_adapter(model, policy, stochastic);
  data::Dataset rollouts = data::collect(env, task, *adapter, episodes, seed);
  std::vector<double> returns;
  returns.reserve(rollouts.size());
  for (const data::Trajectory& tr : rollouts.trajectories()) {
    returns.push_back(tr.episode_return());
  }
  return returns;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double normalized_return(const std::vector<double>& returns, double expert_mean,
                         double random_mean) {
  const double denom = expert_mean - random_mean;
  if (std::abs(denom) < 1e-9) {
    throw DomainError("normalized_return: expert and random baselines coincide");
  }
  return 100.0 * (mean_of(returns) - random_mean) / denom;
}

}  // namespace aime::imitate
