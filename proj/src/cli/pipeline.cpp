#include "aime/cli/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>

#include "aime/common/csv.hpp"

namespace aime::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> rollout_returns(const env::Env& env, const env::Task& task,
                                    data::RolloutPolicy& policy, int episodes,
                                    std::uint64_t seed) {
  data::Dataset rollouts = data::collect(env, task, policy, episodes, seed);
  std::vector<double> returns;
  returns.reserve(rollouts.size());
  for (const data::Trajectory& tr : rollouts.trajectories()) {
    returns.push_back(tr.episode_return());
  }
  return returns;
}

MethodOutcome finish_outcome(std::string method, std::vector<double> returns,
                             const CellInputs& inputs) {
  MethodOutcome out;
  out.method = std::move(method);
  out.returns = std::move(returns);
  out.mean_return = imitate::mean_of(out.returns);
  out.normalized =
      imitate::normalized_return(out.returns, inputs.expert_mean, inputs.random_mean);
  out.raw_expert_ratio =
      inputs.expert_mean != 0.0 ? 100.0 * out.mean_return / inputs.expert_mean : 0.0;
  return out;
}

/// Evaluation seed shared across methods within a cell (paired comparisons).
std::uint64_t eval_seed(std::uint64_t seed) { return derive_seed(seed, "eval-env"); }

nlohmann::ordered_json returns_json(const std::vector<double>& returns) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (double r : returns) arr.push_back(r);
  return arr;
}

std::vector<nlohmann::ordered_json> run_parallel(
    std::vector<std::function<nlohmann::ordered_json()>> cells, int jobs) {
  std::vector<nlohmann::ordered_json> results(cells.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) results[i] = cells[i]();
    return results;
  }
  std::size_t next = 0;
  while (next < cells.size()) {
    const std::size_t batch =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), cells.size() - next);
    std::vector<std::future<nlohmann::ordered_json>> futures;
    futures.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) {
      futures.push_back(std::async(std::launch::async, cells[next + k]));
    }
    for (std::size_t k = 0; k < batch; ++k) results[next + k] = futures[k].get();
    next += batch;
  }
  return results;
}

}  // namespace

namespace {

/// Re-targets a prepared cell at a different demonstration task: demos and
/// normalization anchors are re-collected, the environment and embodiment
/// data are shared.
CellInputs with_demo_task(const CellInputs& base, const ExperimentConfig& cfg,
                          const std::string& demo_task, std::uint64_t seed) {
  CellInputs inputs;
  inputs.env = base.env;
  inputs.body = base.body;
  inputs.demo_task = base.env->task(demo_task);

  auto expert = data::expert_policy(inputs.demo_task);
  inputs.demo_hidden = data::collect(*inputs.env, inputs.demo_task, *expert, cfg.demo_episodes,
                                     derive_seed(seed, "collect-demo-" + demo_task));
  inputs.demo = data::strip_actions(inputs.demo_hidden);

  auto expert_eval = data::expert_policy(inputs.demo_task);
  inputs.expert_mean = imitate::mean_of(rollout_returns(
      *inputs.env, inputs.demo_task, *expert_eval, cfg.eval.episodes, eval_seed(seed)));
  auto random_eval = data::uniform_random_policy(inputs.env->action_dim());
  inputs.random_mean = imitate::mean_of(rollout_returns(
      *inputs.env, inputs.demo_task, *random_eval, cfg.eval.episodes, eval_seed(seed)));
  return inputs;
}

}  // namespace

CellInputs prepare_inputs(const ExperimentConfig& cfg, std::uint64_t seed) {
  CellInputs inputs;
  inputs.env = make_env(cfg.env);
  const env::Env& env = *inputs.env;
  env::Task body_task = env.task(cfg.embodiment.task);
  inputs.demo_task = env.task(cfg.demo_task);

  auto body_policy = make_collect_policy(cfg.embodiment, env, body_task);
  inputs.body = data::collect(env, body_task, *body_policy, cfg.embodiment.episodes,
                              derive_seed(seed, "collect-body"));

  auto expert = data::expert_policy(inputs.demo_task);
  inputs.demo_hidden = data::collect(env, inputs.demo_task, *expert, cfg.demo_episodes,
                                     derive_seed(seed, "collect-demo"));
  inputs.demo = data::strip_actions(inputs.demo_hidden);

  // Normalization anchors on the shared evaluation seed stream.
  auto expert_eval = data::expert_policy(inputs.demo_task);
  inputs.expert_mean = imitate::mean_of(
      rollout_returns(env, inputs.demo_task, *expert_eval, cfg.eval.episodes, eval_seed(seed)));
  auto random_eval = data::uniform_random_policy(env.action_dim());
  inputs.random_mean = imitate::mean_of(
      rollout_returns(env, inputs.demo_task, *random_eval, cfg.eval.episodes, eval_seed(seed)));
  return inputs;
}

nlohmann::ordered_json outcome_to_json(const MethodOutcome& outcome) {
  nlohmann::ordered_json j;
  j["method"] = outcome.method;
  j["returns"] = returns_json(outcome.returns);
  j["mean_return"] = outcome.mean_return;
  j["normalized_return"] = outcome.normalized;
  j["raw_expert_ratio"] = outcome.raw_expert_ratio;
  if (!outcome.detail.is_null()) j["detail"] = outcome.detail;
  return j;
}

wm::WorldModel train_cell_model(const CellInputs& inputs, const ExperimentConfig& cfg,
                                std::uint64_t seed, const std::filesystem::path* outdir) {
  wm::SSMConfig ssm = cfg.ssm;
  auto [model, log] = wm::train_world_model(inputs.body, ssm, cfg.phase1, seed);
  if (outdir) {
    wm::write_epoch_log(*outdir / "curves" / "phase1.csv", log);
    model.save(*outdir / "checkpoints" / "world_model.ckpt");
  }
  return std::move(model);
}

namespace {

nlohmann::ordered_json phase2_log_json(const std::vector<imitate::Phase2Stats>& log) {
  nlohmann::ordered_json j;
  if (!log.empty()) {
    j["epochs"] = log.back().epoch;
    j["final_j"] = log.back().j;
    j["final_j_rec"] = log.back().j_rec;
    j["final_j_kl"] = log.back().j_kl;
    if (std::isfinite(log.back().action_mse)) j["final_action_mse"] = log.back().action_mse;
  } else {
    j["epochs"] = 0;
  }
  return j;
}

MethodOutcome run_plan_variant(const CellInputs& inputs, const wm::WorldModel& model,
                               const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path* outdir) {
  // Per-sequence action inference, then behavioural cloning of the planned
  // actions (the classic reduction of tracking-based imitation).
  std::vector<data::Trajectory> labeled;
  double plan_mse = 0.0;
  Eigen::Index mse_count = 0;
  for (std::size_t k = 0; k < inputs.demo.size(); ++k) {
    const data::Trajectory& tr = inputs.demo.at(k);
    imitate::PlanResult res = imitate::plan_actions(model, tr.observations, cfg.plan,
                                                    derive_seed(seed, "plan", k));
    data::Trajectory copy = tr;
    copy.actions = res.actions;
    labeled.push_back(std::move(copy));
    const data::Trajectory& hidden = inputs.demo_hidden.at(k);
    plan_mse += (res.actions - *hidden.actions).squaredNorm();
    mse_count += hidden.actions->size();
  }
  data::Dataset planned(data::DatasetRole::embodiment, std::move(labeled));
  baselines::BcResult bc = baselines::bc_oracle(planned, cfg.baselines, seed);
  if (outdir) bc.policy.save(*outdir / "checkpoints" / "policy.ckpt");

  auto adapter = baselines::stacked_policy_adapter(bc.policy, cfg.eval.stochastic);
  MethodOutcome out = finish_outcome(
      "plan", rollout_returns(*inputs.env, inputs.demo_task, *adapter, cfg.eval.episodes,
                              eval_seed(seed)),
      inputs);
  out.detail["plan_action_mse"] = plan_mse / static_cast<double>(mse_count);
  return out;
}

}  // namespace

MethodOutcome run_aime_variant(const CellInputs& inputs, const wm::WorldModel& model,
                               const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path* outdir) {
  using Variant = imitate::ImitationConfig::Variant;
  if (cfg.imitation.variant == Variant::plan) {
    return run_plan_variant(inputs, model, cfg, seed, outdir);
  }

  imitate::Phase2Result phase2 = [&] {
    if (cfg.imitation.variant == Variant::aime_idm) {
      imitate::IdmResult idm = imitate::train_idm_head(model, inputs.body, cfg.latent_idm, seed);
      return imitate::aime_idm_phase2(model, idm.idm, inputs.demo, cfg.imitation, seed,
                                      &inputs.demo_hidden);
    }
    return imitate::aime_phase2(model, inputs.demo, cfg.imitation, seed, &inputs.demo_hidden);
  }();

  if (outdir) {
    imitate::write_phase2_log(*outdir / "curves" / "phase2.csv", phase2.log);
    phase2.policy.save(*outdir / "checkpoints" / "policy.ckpt");
  }

  std::string method = to_string(cfg.imitation.variant);
  if (cfg.imitation.mask != imitate::ImitationConfig::Mask::full) {
    method += "/" + to_string(cfg.imitation.mask);
  }
  MethodOutcome out = finish_outcome(
      method,
      imitate::deploy_policy(model, phase2.policy, *inputs.env, inputs.demo_task,
                             cfg.eval.episodes, eval_seed(seed), cfg.eval.stochastic),
      inputs);
  out.detail["phase2"] = phase2_log_json(phase2.log);
  return out;
}

MethodOutcome run_bco_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                               std::uint64_t seed) {
  baselines::BcoResult res = baselines::bco(inputs.body, inputs.demo, cfg.baselines, seed);
  auto adapter = baselines::stacked_policy_adapter(res.policy, cfg.eval.stochastic);
  MethodOutcome out = finish_outcome(
      "bco", rollout_returns(*inputs.env, inputs.demo_task, *adapter, cfg.eval.episodes,
                             eval_seed(seed)),
      inputs);
  out.detail["idm_best_val_nll"] = res.idm_log.back().val_nll;
  return out;
}

MethodOutcome run_bc_oracle_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                                     std::uint64_t seed) {
  baselines::BcResult res = baselines::bc_oracle(inputs.demo_hidden, cfg.baselines, seed);
  auto adapter = baselines::stacked_policy_adapter(res.policy, cfg.eval.stochastic);
  return finish_outcome("bc-oracle",
                        rollout_returns(*inputs.env, inputs.demo_task, *adapter,
                                        cfg.eval.episodes, eval_seed(seed)),
                        inputs);
}

MethodOutcome run_iidm_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                                std::uint64_t seed) {
  baselines::IidmResult res = baselines::iidm(inputs.body, inputs.demo, cfg.baselines, seed);
  auto adapter = baselines::stacked_policy_adapter(res.policy, cfg.eval.stochastic);
  return finish_outcome("iidm",
                        rollout_returns(*inputs.env, inputs.demo_task, *adapter,
                                        cfg.eval.episodes, eval_seed(seed)),
                        inputs);
}

nlohmann::ordered_json run_pipeline(const ExperimentConfig& cfg) {
  const std::filesystem::path outdir = resolve_output(cfg.output);
  std::filesystem::create_directories(outdir / "curves");
  std::filesystem::create_directories(outdir / "checkpoints");
  std::filesystem::create_directories(outdir / "datasets");
  save_config(cfg, outdir / "config.json");

  nlohmann::ordered_json summary;
  summary["artifact_version"] = kArtifactVersion;
  summary["config_hash"] = config_hash(cfg);
  {
    nlohmann::ordered_json cfg_json;
    to_json(cfg_json, cfg);
    summary["config"] = cfg_json;
  }
  summary["seeds"] = std::vector<std::uint64_t>{cfg.seed};

  nlohmann::ordered_json timing;
  const auto t_start = Clock::now();
  std::string stage = "collect";
  try {
    CellInputs inputs = prepare_inputs(cfg, cfg.seed);
    data::save_dataset(inputs.body, outdir / "datasets" / "body");
    data::save_dataset(inputs.demo, outdir / "datasets" / "demo");
    data::save_dataset(inputs.demo_hidden, outdir / "datasets" / "demo-ref");
    summary["stages"]["collect"] = {
        {"body_episodes", inputs.body.size()},
        {"demo_episodes", inputs.demo.size()},
        {"body_hash", inputs.body.manifest().content_hash},
        {"demo_hash", inputs.demo.manifest().content_hash},
    };
    summary["normalization"] = {{"expert_mean", inputs.expert_mean},
                                {"random_mean", inputs.random_mean}};
    timing["collect_s"] = seconds_since(t_start);

    stage = "train-model";
    const auto t_model = Clock::now();
    ExperimentConfig resolved = cfg;
    resolve_dims(resolved, *inputs.env);
    wm::SSMConfig ssm = resolved.ssm;
    auto [model, p1_log] = wm::train_world_model(inputs.body, ssm, resolved.phase1, cfg.seed);
    wm::write_epoch_log(outdir / "curves" / "phase1.csv", p1_log);
    model.save(outdir / "checkpoints" / "world_model.ckpt");
    summary["stages"]["phase1"] = {
        {"epochs", p1_log.empty() ? 0 : p1_log.back().epoch},
        {"final_j", p1_log.empty() ? 0.0 : p1_log.back().j},
        {"final_j_rec", p1_log.empty() ? 0.0 : p1_log.back().j_rec},
        {"final_j_kl", p1_log.empty() ? 0.0 : p1_log.back().j_kl},
        {"model_hash", model.params_hash()},
    };
    timing["phase1_s"] = seconds_since(t_model);

    stage = "imitate";
    const auto t_p2 = Clock::now();
    MethodOutcome outcome = run_aime_variant(inputs, model, resolved, cfg.seed, &outdir);
    timing["phase2_s"] = seconds_since(t_p2);

    summary["results"] = outcome_to_json(outcome);
  } catch (const std::exception& err) {
    summary["failed_stage"] = stage;
    summary["error"] = err.what();
    std::ofstream out(outdir / "summary.json");
    out << summary.dump(2) << "\n";
    throw;
  }
  {
    std::ofstream out(outdir / "summary.json");
    out << summary.dump(2) << "\n";
  }
  timing["total_s"] = seconds_since(t_start);
  {
    std::ofstream out(outdir / "timing.json");
    out << timing.dump(2) << "\n";
  }
  return summary;
}

nlohmann::ordered_json run_transfer_matrix(const ExperimentConfig& cfg,
                                           const std::vector<std::string>& tasks, int jobs) {
  if (tasks.empty()) throw DomainError("matrix: need at least one task");
  const std::vector<std::uint64_t> seeds = cfg.seed_list();

  // One closure per (seed, embodiment task): trains the row model once and
  // evaluates every demonstration column with it.
  std::vector<std::function<nlohmann::ordered_json()>> rows;
  for (std::uint64_t seed : seeds) {
    for (const std::string& row_task : tasks) {
      rows.push_back([&, seed, row_task]() {
        // The model depends only on the row's embodiment data; train it once
        // and reuse it for every demonstration column.
        ExperimentConfig row_cfg = cfg;
        row_cfg.embodiment.task = row_task;
        CellInputs row_inputs = prepare_inputs(row_cfg, seed);
        resolve_dims(row_cfg, *row_inputs.env);
        wm::WorldModel model = train_cell_model(row_inputs, row_cfg, seed, nullptr);

        nlohmann::ordered_json row_cells = nlohmann::ordered_json::array();
        for (const std::string& col_task : tasks) {
          ExperimentConfig cell_cfg = row_cfg;
          cell_cfg.demo_task = col_task;
          CellInputs inputs = with_demo_task(row_inputs, cell_cfg, col_task, seed);
          MethodOutcome outcome = run_aime_variant(inputs, model, cell_cfg, seed, nullptr);
          nlohmann::ordered_json cell = outcome_to_json(outcome);
          cell["embodiment_task"] = row_task;
          cell["demo_task"] = col_task;
          cell["seed"] = seed;
          row_cells.push_back(std::move(cell));
        }
        return row_cells;
      });
    }
  }
  std::vector<nlohmann::ordered_json> results = run_parallel(std::move(rows), jobs);

  nlohmann::ordered_json report;
  report["artifact_version"] = kArtifactVersion;
  report["config_hash"] = config_hash(cfg);
  report["kind"] = "transfer-matrix";
  report["tasks"] = tasks;
  report["seeds"] = seeds;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& row : results) {
    for (const auto& cell : row) cells.push_back(cell);
  }
  report["cells"] = cells;

  // Mean normalized return per (row, col) over seeds, plus row/col averages.
  const std::size_t n = tasks.size();
  std::vector<std::vector<double>> grid(n, std::vector<double>(n, 0.0));
  for (const auto& cell : cells) {
    std::size_t r = 0, c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (tasks[i] == cell.at("embodiment_task").get<std::string>()) r = i;
      if (tasks[i] == cell.at("demo_task").get<std::string>()) c = i;
    }
    grid[r][c] += cell.at("normalized_return").get<double>() / static_cast<double>(seeds.size());
  }
  nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
  nlohmann::ordered_json row_avg = nlohmann::ordered_json::array();
  nlohmann::ordered_json col_avg = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < n; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      row.push_back(grid[r][c]);
      total += grid[r][c];
    }
    matrix.push_back(row);
    row_avg.push_back(total / static_cast<double>(n));
  }
  for (std::size_t c = 0; c < n; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += grid[r][c];
    col_avg.push_back(total / static_cast<double>(n));
  }
  report["normalized_matrix"] = matrix;
  report["row_averages"] = row_avg;
  report["column_averages"] = col_avg;
  return report;
}

nlohmann::ordered_json run_demo_sweep(const ExperimentConfig& cfg,
                                      const std::vector<int>& demo_counts, int jobs) {
  if (demo_counts.empty()) throw DomainError("sweep: need at least one count");
  for (std::size_t i = 1; i < demo_counts.size(); ++i) {
    if (demo_counts[i] <= demo_counts[i - 1]) throw DomainError("sweep: counts must ascend");
  }
  const std::vector<std::uint64_t> seeds = cfg.seed_list();
  const int max_count = demo_counts.back();

  std::vector<std::function<nlohmann::ordered_json()>> cells;
  for (std::uint64_t seed : seeds) {
    cells.push_back([&, seed]() {
      // Embodiment data, the model, and the demo pool are shared across
      // counts; each count takes a nested prefix of the pool.
      ExperimentConfig pool_cfg = cfg;
      pool_cfg.demo_episodes = max_count;
      CellInputs pool = prepare_inputs(pool_cfg, seed);
      resolve_dims(pool_cfg, *pool.env);
      wm::WorldModel model = train_cell_model(pool, pool_cfg, seed, nullptr);

      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (int count : demo_counts) {
        CellInputs inputs;
        inputs.env = pool.env;
        inputs.demo_task = pool.demo_task;
        inputs.body = pool.body;
        inputs.demo_hidden = pool.demo_hidden.prefix(static_cast<std::size_t>(count));
        inputs.demo = pool.demo.prefix(static_cast<std::size_t>(count));
        inputs.expert_mean = pool.expert_mean;
        inputs.random_mean = pool.random_mean;

        std::vector<MethodOutcome> outcomes;
        outcomes.push_back(run_aime_variant(inputs, model, pool_cfg, seed, nullptr));
        outcomes.push_back(run_bco_baseline(inputs, pool_cfg, seed));
        outcomes.push_back(run_bc_oracle_baseline(inputs, pool_cfg, seed));
        for (const MethodOutcome& o : outcomes) {
          nlohmann::ordered_json row = outcome_to_json(o);
          row["demo_count"] = count;
          row["seed"] = seed;
          rows.push_back(std::move(row));
        }
      }
      return rows;
    });
  }
  std::vector<nlohmann::ordered_json> results = run_parallel(std::move(cells), jobs);

  nlohmann::ordered_json report;
  report["artifact_version"] = kArtifactVersion;
  report["config_hash"] = config_hash(cfg);
  report["kind"] = "demo-sweep";
  report["demo_counts"] = demo_counts;
  report["seeds"] = seeds;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& chunk : results) {
    for (const auto& row : chunk) rows.push_back(row);
  }
  report["rows"] = rows;

  // Mean and stddev of normalized return per (method, count) across seeds.
  nlohmann::ordered_json aggregates = nlohmann::ordered_json::array();
  for (const std::string& method : {"aime", "bco", "bc-oracle"}) {
    for (int count : demo_counts) {
      std::vector<double> vals;
      for (const auto& row : rows) {
        if (row.at("method") == method && row.at("demo_count") == count) {
          vals.push_back(row.at("normalized_return").get<double>());
        }
      }
      if (vals.empty()) continue;
      const double mean = imitate::mean_of(vals);
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
      aggregates.push_back({{"method", method},
                            {"demo_count", count},
                            {"mean_normalized", mean},
                            {"stddev_normalized", std::sqrt(var)}});
    }
  }
  report["aggregates"] = aggregates;
  return report;
}

nlohmann::ordered_json run_ablations(const ExperimentConfig& cfg, int jobs) {
  const std::vector<std::uint64_t> seeds = cfg.seed_list();

  std::vector<std::function<nlohmann::ordered_json()>> cells;
  for (std::uint64_t seed : seeds) {
    cells.push_back([&, seed]() {
      // Mixed embodiment dataset: experience from every task of the
      // embodiment, concatenated.
      ExperimentConfig base = cfg;
      CellInputs inputs = prepare_inputs(base, seed);
      resolve_dims(base, *inputs.env);
      std::vector<data::Dataset> parts{inputs.body};
      std::uint64_t part = 1;
      for (const std::string& other : inputs.env->task_ids()) {
        if (other == cfg.embodiment.task) continue;
        ExperimentConfig alt = cfg;
        alt.embodiment.task = other;
        env::Task alt_task = inputs.env->task(other);
        auto policy = make_collect_policy(alt.embodiment, *inputs.env, alt_task);
        parts.push_back(data::collect(*inputs.env, alt_task, *policy, cfg.embodiment.episodes,
                                      derive_seed(seed, "collect-mix", part++)));
      }
      inputs.body = data::concat(parts);

      wm::WorldModel model = train_cell_model(inputs, base, seed, nullptr);

      using Mask = imitate::ImitationConfig::Mask;
      using Variant = imitate::ImitationConfig::Variant;
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      auto push = [&](MethodOutcome outcome, const char* label) {
        nlohmann::ordered_json row = outcome_to_json(outcome);
        row["variant"] = label;
        row["seed"] = seed;
        rows.push_back(std::move(row));
      };

      ExperimentConfig variant = base;
      variant.imitation.variant = Variant::aime;
      variant.imitation.mask = Mask::full;
      push(run_aime_variant(inputs, model, variant, seed, nullptr), "aime");
      variant.imitation.mask = Mask::rec_only;
      push(run_aime_variant(inputs, model, variant, seed, nullptr), "rec-only");
      variant.imitation.mask = Mask::kl_only;
      push(run_aime_variant(inputs, model, variant, seed, nullptr), "kl-only");
      variant.imitation.mask = Mask::full;
      variant.imitation.variant = Variant::aime_idm;
      push(run_aime_variant(inputs, model, variant, seed, nullptr), "aime-idm");
      push(run_iidm_baseline(inputs, base, seed), "iidm");
      push(run_bco_baseline(inputs, base, seed), "bco");
      return rows;
    });
  }
  std::vector<nlohmann::ordered_json> results = run_parallel(std::move(cells), jobs);

  nlohmann::ordered_json report;
  report["artifact_version"] = kArtifactVersion;
  report["config_hash"] = config_hash(cfg);
  report["kind"] = "ablations";
  report["seeds"] = seeds;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& chunk : results) {
    for (const auto& row : chunk) rows.push_back(row);
  }
  report["rows"] = rows;

  nlohmann::ordered_json aggregates;
  for (const char* label : {"aime", "rec-only", "kl-only", "aime-idm", "iidm", "bco"}) {
    std::vector<double> vals;
    for (const auto& row : rows) {
      if (row.at("variant") == label) vals.push_back(row.at("normalized_return").get<double>());
    }
    aggregates[label] = vals.empty() ? 0.0 : imitate::mean_of(vals);
  }
  report["mean_normalized"] = aggregates;
  return report;
}

int print_reports(const std::filesystem::path& root) {
  int count = 0;
  if (!std::filesystem::exists(root)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) continue;
    const std::string name = j.value("config", nlohmann::ordered_json{}).value("name", "?");
    if (j.contains("failed_stage")) {
      std::cout << name << "  FAILED at " << j["failed_stage"].get<std::string>() << "  ("
                << path.string() << ")\n";
    } else if (j.contains("results")) {
      const auto& res = j["results"];
      std::cout << name << "  method=" << res.value("method", "?")
                << "  normalized=" << res.value("normalized_return", 0.0)
                << "  mean_return=" << res.value("mean_return", 0.0) << "\n";
    }
    ++count;
  }
  return count;
}

}  // namespace aime::cli
