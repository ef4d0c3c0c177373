#include "aime/data/collect.hpp"

namespace aime::data {

namespace {

class ExpertPolicy final : public RolloutPolicy {
 public:
  explicit ExpertPolicy(env::Task task) : task_(std::move(task)) {}
  void begin_episode(std::uint64_t) override {}
  env::Vector act(const env::Vector&, const env::Vector& state) override {
    return task_.expert(state);
  }

 private:
  env::Task task_;
};

class UniformRandomPolicy final : public RolloutPolicy {
 public:
  explicit UniformRandomPolicy(int action_dim) : action_dim_(action_dim), rng_(0) {}
  void begin_episode(std::uint64_t episode_seed) override { rng_ = SeededRng(episode_seed); }
  env::Vector act(const env::Vector&, const env::Vector&) override {
    env::Vector a(action_dim_);
    for (int i = 0; i < action_dim_; ++i) a[i] = rng_.uniform(-1.0, 1.0);
    return a;
  }

 private:
  int action_dim_;
  SeededRng rng_;
};

class NoisyExpertPolicy final : public RolloutPolicy {
 public:
  NoisyExpertPolicy(env::Task task, int action_dim, double action_noise, double random_prob)
      : task_(std::move(task)),
        action_dim_(action_dim),
        action_noise_(action_noise),
        random_prob_(random_prob),
        rng_(0) {}

  void begin_episode(std::uint64_t episode_seed) override {
    rng_ = SeededRng(episode_seed);
    random_episode_ = rng_.uniform() < random_prob_;
  }

  env::Vector act(const env::Vector&, const env::Vector& state) override {
    env::Vector a(action_dim_);
    if (random_episode_) {
      for (int i = 0; i < action_dim_; ++i) a[i] = rng_.uniform(-1.0, 1.0);
      return a;
    }
    a = task_.expert(state);
    for (int i = 0; i < action_dim_; ++i) a[i] += action_noise_ * rng_.normal();
    return env::clamp_action(a, nullptr);
  }

 private:
  env::Task task_;
  int action_dim_;
  double action_noise_;
  double random_prob_;
  SeededRng rng_;
  bool random_episode_ = false;
};

}  // namespace

std::unique_ptr<RolloutPolicy> expert_policy(env::Task task) {
  return std::make_unique<ExpertPolicy>(std::move(task));
}

std::unique_ptr<RolloutPolicy> uniform_random_policy(int action_dim) {
  return std::make_unique<UniformRandomPolicy>(action_dim);
}

std::unique_ptr<RolloutPolicy> noisy_expert_policy(env::Task task, int action_dim,
                                                   double action_noise,
                                                   double random_episode_prob) {
  return std::make_unique<NoisyExpertPolicy>(std::move(task), action_dim, action_noise,
                                             random_episode_prob);
}

Dataset collect(const env::Env& env, const env::Task& task, RolloutPolicy& policy, int episodes,
                std::uint64_t seed) {
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(episodes));
  const int horizon = env.episode_len();

  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t env_seed = derive_seed(seed, "collect-env", static_cast<std::uint64_t>(e));
    const std::uint64_t pol_seed = derive_seed(seed, "collect-policy", static_cast<std::uint64_t>(e));
    SeededRng env_rng(env_seed);
    policy.begin_episode(pol_seed);

    env::Vector state = env.init_state(env_rng);
    env::Vector obs = env.observe(state, env_rng);

    Trajectory tr;
    tr.observations.resize(horizon, env.obs_dim());
    tr.actions = Matrix(horizon, env.action_dim());
    tr.rewards = Vector(horizon);
    tr.seed = env_seed;
    tr.env_id = env.id();
    tr.task_id = task.id;

    for (int t = 0; t < horizon; ++t) {
      env::Vector action = policy.act(obs, state);
      if (!action.allFinite()) {
        throw NumericalError("collect: policy emitted non-finite action in episode " +
                                 std::to_string(e),
                             t);
      }
      action = env::clamp_action(action, nullptr);  // record what actually drove the step
      state = env.step(state, action, env_rng);
      obs = env.observe(state, env_rng);
      tr.actions->row(t) = action.transpose();
      tr.observations.row(t) = obs.transpose();
      (*tr.rewards)[t] = task.reward(state);
    }
    trajs.push_back(std::move(tr));
  }
  return Dataset(DatasetRole::embodiment, std::move(trajs));
}

}  // namespace aime::data
