#pragma once

#include <memory>
#include <string>

#include "aime/baselines/baselines.hpp"
#include "aime/env/lingauss.hpp"
#include "aime/env/pointmass.hpp"
#include "aime/imitate/idm.hpp"
#include "aime/imitate/plan.hpp"
#include "aime/wm/trainer.hpp"

namespace aime::cli {

struct EnvConfig {
  std::string id = "pointmass";  // pointmass | lingauss
  std::string mode = "lpomdp";   // mdp | lpomdp (pointmass only; lingauss observes C x)
  int episode_len = 50;
  int action_repeat = 1;
  // pointmass dynamics
  double dt = 0.1;
  double drag = 0.1;
  double bound = 1.0;
  double process_noise = 0.0;
  double init_pos_scale = 0.2;
  // lingauss dynamics
  bool noiseless = false;
  double init_state_scale = 0.3;
};

std::unique_ptr<env::Env> make_env(const EnvConfig& cfg);

struct CollectConfig {
  std::string task = "reach-east";
  int episodes = 60;
  std::string policy = "noisy-expert";  // expert | random | noisy-expert
  double action_noise = 0.3;
  double random_episode_prob = 0.2;
};

std::unique_ptr<data::RolloutPolicy> make_collect_policy(const CollectConfig& cfg,
                                                         const env::Env& env,
                                                         const env::Task& task);

struct EvalConfig {
  int episodes = 20;
  bool stochastic = false;
};

/// One experiment cell: datasets, model, imitation variant, evaluation. Fully
/// serializable; the canonical JSON dump's hash identifies the experiment.
struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // multi-seed protocols; empty -> {seed}

  EnvConfig env;
  CollectConfig embodiment;
  std::string demo_task = "reach-east";
  int demo_episodes = 10;

  wm::SSMConfig ssm;  // obs/action dims resolved from the env when 0
  wm::Phase1Config phase1;
  imitate::ImitationConfig imitation;
  imitate::IdmConfig latent_idm;
  imitate::PlanConfig plan;
  baselines::BaselinesConfig baselines;
  EvalConfig eval;

  std::string output = "runs/experiment";

  std::vector<std::uint64_t> seed_list() const { return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds; }
};

void to_json(nlohmann::ordered_json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::ordered_json& j, ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// SHA-256 of the canonical serialized form.
std::string config_hash(const ExperimentConfig& cfg);

/// Applies "a.b.c=value" onto the serialized form (scalars only). Throws
/// DomainError for unknown paths or unparseable values.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Resolves the output directory: absolute paths and paths under an existing
/// prefix are kept; otherwise the AIME_OUT_ROOT environment variable (when
/// set) is prepended.
std::filesystem::path resolve_output(const std::string& output);

/// Fills ssm.obs_dim / ssm.action_dim from the environment when unset.
void resolve_dims(ExperimentConfig& cfg, const env::Env& env);

/// Built-in presets ("smoke", "pm-default", "lingauss-oracle").
ExperimentConfig preset(const std::string& name);

}  // namespace aime::cli
