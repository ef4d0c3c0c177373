#include "aime/cli/config.hpp"

#include <cstdlib>
#include <fstream>

#include "aime/common/sha256.hpp"

namespace aime::cli {

std::unique_ptr<env::Env> make_env(const EnvConfig& cfg) {
  if (cfg.id == "pointmass") {
    env::PointMassConfig pm;
    pm.episode_len = cfg.episode_len;
    pm.action_repeat = cfg.action_repeat;
    pm.mode = env::obs_mode_from_string(cfg.mode);
    pm.dt = cfg.dt;
    pm.drag = cfg.drag;
    pm.bound = cfg.bound;
    pm.process_noise = cfg.process_noise;
    pm.init_pos_scale = cfg.init_pos_scale;
    return std::make_unique<env::PointMassEnv>(pm);
  }
  if (cfg.id == "lingauss") {
    env::LinGaussConfig lg = env::default_lingauss(cfg.noiseless);
    lg.episode_len = cfg.episode_len;
    lg.action_repeat = cfg.action_repeat;
    lg.params.p0.setConstant(cfg.init_state_scale * cfg.init_state_scale);
    return std::make_unique<env::LinGaussEnv>(lg);
  }
  throw DomainError("unknown environment '" + cfg.id + "'");
}

std::unique_ptr<data::RolloutPolicy> make_collect_policy(const CollectConfig& cfg,
                                                         const env::Env& env,
                                                         const env::Task& task) {
  if (cfg.policy == "expert") return data::expert_policy(task);
  if (cfg.policy == "random") return data::uniform_random_policy(env.action_dim());
  if (cfg.policy == "noisy-expert") {
    return data::noisy_expert_policy(task, env.action_dim(), cfg.action_noise,
                                     cfg.random_episode_prob);
  }
  throw DomainError("unknown collection policy '" + cfg.policy + "'");
}

namespace {

nlohmann::ordered_json env_to_json(const EnvConfig& e) {
  return nlohmann::ordered_json{
      {"id", e.id},
      {"mode", e.mode},
      {"episode_len", e.episode_len},
      {"action_repeat", e.action_repeat},
      {"dt", e.dt},
      {"drag", e.drag},
      {"bound", e.bound},
      {"process_noise", e.process_noise},
      {"init_pos_scale", e.init_pos_scale},
      {"noiseless", e.noiseless},
      {"init_state_scale", e.init_state_scale},
  };
}

EnvConfig env_from_json(const nlohmann::ordered_json& j) {
  EnvConfig e;
  e.id = j.value("id", e.id);
  e.mode = j.value("mode", e.mode);
  e.episode_len = j.value("episode_len", e.episode_len);
  e.action_repeat = j.value("action_repeat", e.action_repeat);
  e.dt = j.value("dt", e.dt);
  e.drag = j.value("drag", e.drag);
  e.bound = j.value("bound", e.bound);
  e.process_noise = j.value("process_noise", e.process_noise);
  e.init_pos_scale = j.value("init_pos_scale", e.init_pos_scale);
  e.noiseless = j.value("noiseless", e.noiseless);
  e.init_state_scale = j.value("init_state_scale", e.init_state_scale);
  return e;
}

nlohmann::ordered_json collect_to_json(const CollectConfig& c) {
  return nlohmann::ordered_json{
      {"task", c.task},
      {"episodes", c.episodes},
      {"policy", c.policy},
      {"action_noise", c.action_noise},
      {"random_episode_prob", c.random_episode_prob},
  };
}

CollectConfig collect_from_json(const nlohmann::ordered_json& j) {
  CollectConfig c;
  c.task = j.value("task", c.task);
  c.episodes = j.value("episodes", c.episodes);
  c.policy = j.value("policy", c.policy);
  c.action_noise = j.value("action_noise", c.action_noise);
  c.random_episode_prob = j.value("random_episode_prob", c.random_episode_prob);
  return c;
}

nlohmann::ordered_json idm_to_json(const imitate::IdmConfig& c) {
  return nlohmann::ordered_json{
      {"hidden", c.hidden},     {"layers", c.layers},
      {"epochs", c.epochs},     {"steps_per_epoch", c.steps_per_epoch},
      {"batch", c.batch},       {"chunk_len", c.chunk_len},
      {"lr", c.lr},             {"grad_clip", c.grad_clip},
  };
}

imitate::IdmConfig idm_from_json(const nlohmann::ordered_json& j) {
  imitate::IdmConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.batch = j.value("batch", c.batch);
  c.chunk_len = j.value("chunk_len", c.chunk_len);
  c.lr = j.value("lr", c.lr);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  return c;
}

}  // namespace

void to_json(nlohmann::ordered_json& j, const ExperimentConfig& cfg) {
  nlohmann::ordered_json ssm, phase1, imitation, baselines_json;
  wm::to_json(ssm, cfg.ssm);
  wm::to_json(phase1, cfg.phase1);
  imitate::to_json(imitation, cfg.imitation);
  baselines::to_json(baselines_json, cfg.baselines);
  j = nlohmann::ordered_json{
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"seeds", cfg.seeds},
      {"env", env_to_json(cfg.env)},
      {"embodiment", collect_to_json(cfg.embodiment)},
      {"demo_task", cfg.demo_task},
      {"demo_episodes", cfg.demo_episodes},
      {"ssm", ssm},
      {"phase1", phase1},
      {"imitation", imitation},
      {"latent_idm", idm_to_json(cfg.latent_idm)},
      {"plan", nlohmann::ordered_json{{"iterations", cfg.plan.iterations},
                                      {"lr", cfg.plan.lr},
                                      {"grad_clip", cfg.plan.grad_clip}}},
      {"baselines", baselines_json},
      {"eval",
       nlohmann::ordered_json{{"episodes", cfg.eval.episodes}, {"stochastic", cfg.eval.stochastic}}},
      {"output", cfg.output},
  };
}

void from_json(const nlohmann::ordered_json& j, ExperimentConfig& cfg) {
  cfg.name = j.value("name", cfg.name);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.seeds = j.value("seeds", cfg.seeds);
  if (j.contains("env")) cfg.env = env_from_json(j.at("env"));
  if (j.contains("embodiment")) cfg.embodiment = collect_from_json(j.at("embodiment"));
  cfg.demo_task = j.value("demo_task", cfg.demo_task);
  cfg.demo_episodes = j.value("demo_episodes", cfg.demo_episodes);
  if (j.contains("ssm")) wm::from_json(j.at("ssm"), cfg.ssm);
  if (j.contains("phase1")) wm::from_json(j.at("phase1"), cfg.phase1);
  if (j.contains("imitation")) imitate::from_json(j.at("imitation"), cfg.imitation);
  if (j.contains("latent_idm")) cfg.latent_idm = idm_from_json(j.at("latent_idm"));
  if (j.contains("plan")) {
    cfg.plan.iterations = j.at("plan").value("iterations", cfg.plan.iterations);
    cfg.plan.lr = j.at("plan").value("lr", cfg.plan.lr);
    cfg.plan.grad_clip = j.at("plan").value("grad_clip", cfg.plan.grad_clip);
  }
  if (j.contains("baselines")) baselines::from_json(j.at("baselines"), cfg.baselines);
  if (j.contains("eval")) {
    cfg.eval.episodes = j.at("eval").value("episodes", cfg.eval.episodes);
    cfg.eval.stochastic = j.at("eval").value("stochastic", cfg.eval.stochastic);
  }
  cfg.output = j.value("output", cfg.output);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config " + path.string());
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DomainError("unparseable config " + path.string());
  ExperimentConfig cfg;
  from_json(j, cfg);
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  to_json(j, cfg);
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write config " + path.string());
  out << j.dump(2) << "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  to_json(j, cfg);
  j.erase("output");  // the hash identifies the experiment, not its location
  return sha256_hex(j.dump());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw DomainError("override must be key.path=value");
  std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  nlohmann::ordered_json j;
  to_json(j, cfg);
  nlohmann::ordered_json* node = &j;
  std::size_t start = 0;
  std::vector<std::string> keys;
  while (true) {
    const auto dot = path.find('.', start);
    keys.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i])) throw DomainError("unknown config section '" + keys[i] + "'");
    node = &(*node)[keys[i]];
  }
  const std::string& leaf = keys.back();
  if (!node->contains(leaf)) throw DomainError("unknown config key '" + path + "'");
  nlohmann::ordered_json& slot = (*node)[leaf];
  if (slot.is_string()) {
    slot = value;
  } else if (slot.is_boolean()) {
    slot = (value == "true" || value == "1");
  } else if (slot.is_number_integer() || slot.is_number_unsigned()) {
    slot = std::stoll(value);
  } else if (slot.is_number_float()) {
    slot = std::stod(value);
  } else {
    throw DomainError("config key '" + path + "' is not a scalar");
  }
  ExperimentConfig fresh;
  from_json(j, fresh);
  cfg = fresh;
}

std::filesystem::path resolve_output(const std::string& output) {
  std::filesystem::path p(output);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("AIME_OUT_ROOT")) {
    return std::filesystem::path(root) / p;
  }
  return p;
}

void resolve_dims(ExperimentConfig& cfg, const env::Env& env) {
  if (cfg.ssm.obs_dim == 0) cfg.ssm.obs_dim = env.obs_dim();
  if (cfg.ssm.action_dim == 0) cfg.ssm.action_dim = env.action_dim();
  if (cfg.ssm.obs_dim != env.obs_dim() || cfg.ssm.action_dim != env.action_dim()) {
    throw DomainError("config: ssm dims disagree with the environment");
  }
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "smoke") {
    cfg.name = "smoke";
    cfg.env.id = "pointmass";
    cfg.env.mode = "lpomdp";
    cfg.env.episode_len = 30;
    cfg.embodiment.episodes = 10;
    cfg.demo_episodes = 2;
    cfg.ssm.det_size = 12;
    cfg.ssm.stoch_size = 4;
    cfg.ssm.hidden = 16;
    cfg.phase1.epochs = 3;
    cfg.phase1.steps_per_epoch = 20;
    cfg.phase1.batch = 8;
    cfg.phase1.chunk_len = 15;
    cfg.imitation.epochs = 3;
    cfg.imitation.steps_per_epoch = 20;
    cfg.imitation.batch = 8;
    cfg.imitation.chunk_len = 15;
    cfg.latent_idm.epochs = 2;
    cfg.latent_idm.steps_per_epoch = 20;
    cfg.latent_idm.chunk_len = 15;
    cfg.baselines.epochs = 4;
    cfg.baselines.steps_per_epoch = 20;
    cfg.eval.episodes = 4;
    cfg.output = "runs/smoke";
    return cfg;
  }
  if (name == "pm-default") {
    cfg.name = "pm-default";
    cfg.env.id = "pointmass";
    cfg.env.mode = "lpomdp";
    cfg.embodiment.episodes = 60;
    cfg.demo_episodes = 10;
    cfg.ssm.det_size = 32;
    cfg.ssm.stoch_size = 8;
    cfg.ssm.hidden = 48;
    cfg.phase1.epochs = 25;
    cfg.phase1.chunk_len = 30;
    cfg.imitation.epochs = 25;
    cfg.imitation.chunk_len = 30;
    cfg.latent_idm.epochs = 10;
    cfg.baselines.epochs = 30;
    cfg.output = "runs/pm-default";
    return cfg;
  }
  if (name == "lingauss-oracle") {
    cfg.name = "lingauss-oracle";
    cfg.env.id = "lingauss";
    cfg.env.mode = "mdp";
    cfg.env.episode_len = 30;
    cfg.embodiment.task = "regulate";
    cfg.embodiment.policy = "random";
    cfg.embodiment.episodes = 100;
    cfg.demo_task = "regulate";
    cfg.demo_episodes = 10;
    cfg.ssm.det_size = 32;
    cfg.ssm.stoch_size = 8;
    cfg.ssm.hidden = 32;
    cfg.ssm.decoder_var = wm::SSMConfig::DecoderVar::learned;
    cfg.phase1.epochs = 40;
    cfg.phase1.chunk_len = 30;
    cfg.imitation.epochs = 20;
    cfg.imitation.chunk_len = 30;
    cfg.output = "runs/lingauss-oracle";
    return cfg;
  }
  throw DomainError("unknown preset '" + name + "'");
}

}  // namespace aime::cli
