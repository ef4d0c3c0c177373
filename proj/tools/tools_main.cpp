// Command-line front end: dataset collection, model training, imitation,
// planning, baselines, evaluation, and the preset experiment suites.
// Exit codes: 0 success, 1 stage failure, 2 configuration error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "aime/cli/gradcheck.hpp"
#include "aime/cli/pipeline.hpp"

namespace {

using namespace aime;
using cli::ExperimentConfig;

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitConfigError = 2;

struct ConfigArgs {
  std::string config_path;
  std::string preset = "pm-default";
  std::vector<std::string> overrides;
  std::string output;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--preset", args.preset, "built-in preset when no --config is given")
      ->check(CLI::IsMember({"smoke", "pm-default", "lingauss-oracle"}));
  cmd->add_option("--set", args.overrides, "scalar override key.path=value (repeatable)");
  cmd->add_option("--output", args.output, "output directory (overrides config)");
  auto* seed_opt = cmd->add_option("--seed", args.seed, "seed override");
  cmd->callback([seed_opt, &args]() { args.has_seed = seed_opt->count() > 0; });
}

ExperimentConfig build_config(const ConfigArgs& args) {
  ExperimentConfig cfg =
      args.config_path.empty() ? cli::preset(args.preset) : cli::load_config(args.config_path);
  for (const std::string& assignment : args.overrides) {
    cli::apply_override(cfg, assignment);
  }
  if (!args.output.empty()) cfg.output = args.output;
  if (args.has_seed) cfg.seed = args.seed;
  return cfg;
}

void write_report(const nlohmann::ordered_json& report, const std::string& output,
                  const std::string& filename) {
  const auto dir = cli::resolve_output(output);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / filename);
  out << report.dump(2) << "\n";
  std::cout << "report written to " << (dir / filename).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale laboratory for evidence-maximizing imitation from observation"};
  app.require_subcommand(1);

  ConfigArgs args;

  // run ------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "full pipeline: collect, train, imitate, evaluate");
  add_config_options(run_cmd, args);

  // collect ----------------------------------------------------------------
  auto* collect = app.add_subcommand("collect", "roll episodes into a dataset directory");
  add_config_options(collect, args);
  std::string collect_role = "embodiment";
  collect->add_option("--role", collect_role, "embodiment | demonstration")
      ->check(CLI::IsMember({"embodiment", "demonstration"}));
  std::string collect_out = "dataset";
  collect->add_option("--dataset-out", collect_out, "dataset directory name");

  // train-model --------------------------------------------------------
  auto* train = app.add_subcommand("train-model", "phase 1: fit the world model");
  add_config_options(train, args);
  std::string train_dataset;
  train->add_option("--dataset", train_dataset,
                    "embodiment dataset directory (collected if absent)");

  // imitate --------------------------------------------------------------
  auto* imitate_cmd = app.add_subcommand("imitate", "phase 2 on a trained model");
  add_config_options(imitate_cmd, args);
  std::string imitate_model;
  imitate_cmd->add_option("--model", imitate_model, "world-model checkpoint (trained if absent)");
  std::string imitate_variant;
  imitate_cmd->add_option("--variant", imitate_variant, "aime | aime-idm | plan")
      ->check(CLI::IsMember({"aime", "aime-idm", "plan"}));

  // plan -------------------------------------------------------------------
  auto* plan_cmd = app.add_subcommand("plan", "per-sequence action inference on demos");
  add_config_options(plan_cmd, args);
  std::string plan_model;
  plan_cmd->add_option("--model", plan_model, "world-model checkpoint (trained if absent)");

  // baseline ---------------------------------------------------------------
  auto* baseline_cmd = app.add_subcommand("baseline", "train and evaluate a comparison method");
  add_config_options(baseline_cmd, args);
  std::string baseline_method = "bco";
  baseline_cmd->add_option("--method", baseline_method, "bco | bc-oracle | iidm")
      ->check(CLI::IsMember({"bco", "bc-oracle", "iidm"}));

  // evaluate -----------------------------------------------------------
  auto* evaluate_cmd = app.add_subcommand("evaluate", "deploy a policy checkpoint");
  add_config_options(evaluate_cmd, args);
  std::string eval_model, eval_policy;
  evaluate_cmd->add_option("--model", eval_model, "world-model checkpoint (latent policies)");
  evaluate_cmd->add_option("--policy", eval_policy, "policy checkpoint")->required();

  // experiment suites ----------------------------------------------------
  int jobs = 1;
  auto* matrix_cmd = app.add_subcommand("matrix", "embodiment x demonstration transfer matrix");
  add_config_options(matrix_cmd, args);
  std::vector<std::string> matrix_tasks;
  matrix_cmd->add_option("--tasks", matrix_tasks, "tasks (default: all env tasks)");
  matrix_cmd->add_option("--jobs", jobs, "parallel cells");

  auto* sweep_cmd = app.add_subcommand("sweep", "demonstration-count sweep");
  add_config_options(sweep_cmd, args);
  std::vector<int> sweep_counts{1, 2, 5, 10, 20, 50};
  sweep_cmd->add_option("--counts", sweep_counts, "ascending demo counts");
  sweep_cmd->add_option("--jobs", jobs, "parallel cells");

  auto* ablate_cmd = app.add_subcommand("ablate", "objective and component ablations");
  add_config_options(ablate_cmd, args);
  ablate_cmd->add_option("--jobs", jobs, "parallel cells");

  // gradcheck / report -----------------------------------------------------
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "gradient verification suite");
  auto* report_cmd = app.add_subcommand("report", "summarize runs under a directory");
  std::string report_root = "runs";
  report_cmd->add_option("root", report_root, "directory to scan");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck_cmd->parsed()) {
      return cli::report_gradcheck(cli::gradcheck_suite()) ? kExitOk : kExitStageFailure;
    }
    if (report_cmd->parsed()) {
      const int n = cli::print_reports(cli::resolve_output(report_root));
      std::cout << n << " report(s)\n";
      return kExitOk;
    }

    ExperimentConfig cfg;
    try {
      cfg = build_config(args);
    } catch (const std::exception& err) {
      std::cerr << "config error: " << err.what() << "\n";
      return kExitConfigError;
    }

    if (run_cmd->parsed()) {
      nlohmann::ordered_json summary = cli::run_pipeline(cfg);
      std::cout << "normalized return "
                << summary.at("results").value("normalized_return", 0.0) << "; summary at "
                << (cli::resolve_output(cfg.output) / "summary.json").string() << "\n";
      return kExitOk;
    }

    if (collect->parsed()) {
      auto env = cli::make_env(cfg.env);
      const bool demo_role = collect_role == "demonstration";
      const std::string task_id = demo_role ? cfg.demo_task : cfg.embodiment.task;
      env::Task task = env->task(task_id);
      auto policy = demo_role ? data::expert_policy(task)
                              : cli::make_collect_policy(cfg.embodiment, *env, task);
      const int episodes = demo_role ? cfg.demo_episodes : cfg.embodiment.episodes;
      data::Dataset dataset = data::collect(*env, task, *policy, episodes, cfg.seed);
      if (demo_role) dataset = data::strip_actions(dataset);
      const auto dir = cli::resolve_output(cfg.output) / collect_out;
      data::save_dataset(dataset, dir);
      std::cout << "dataset (" << data::to_string(dataset.role()) << ", " << dataset.size()
                << " episodes) written to " << dir.string() << "\n";
      return kExitOk;
    }

    if (train->parsed()) {
      auto env = cli::make_env(cfg.env);
      cli::resolve_dims(cfg, *env);
      data::Dataset body = [&] {
        if (!train_dataset.empty()) return data::load_dataset(train_dataset);
        env::Task task = env->task(cfg.embodiment.task);
        auto policy = cli::make_collect_policy(cfg.embodiment, *env, task);
        return data::collect(*env, task, *policy, cfg.embodiment.episodes,
                             derive_seed(cfg.seed, "collect-body"));
      }();
      auto [model, log] = wm::train_world_model(body, cfg.ssm, cfg.phase1, cfg.seed);
      const auto dir = cli::resolve_output(cfg.output);
      std::filesystem::create_directories(dir / "curves");
      std::filesystem::create_directories(dir / "checkpoints");
      wm::write_epoch_log(dir / "curves" / "phase1.csv", log);
      model.save(dir / "checkpoints" / "world_model.ckpt");
      std::cout << "model " << model.params_hash().substr(0, 12) << "... written to "
                << (dir / "checkpoints" / "world_model.ckpt").string() << "\n";
      return kExitOk;
    }

    if (imitate_cmd->parsed() || plan_cmd->parsed() || baseline_cmd->parsed()) {
      if (!imitate_variant.empty()) {
        cfg.imitation.variant = imitate::variant_from_string(imitate_variant);
      }
      if (plan_cmd->parsed()) cfg.imitation.variant = imitate::ImitationConfig::Variant::plan;

      cli::CellInputs inputs = cli::prepare_inputs(cfg, cfg.seed);
      cli::resolve_dims(cfg, *inputs.env);
      const auto dir = cli::resolve_output(cfg.output);
      std::filesystem::create_directories(dir / "curves");
      std::filesystem::create_directories(dir / "checkpoints");

      cli::MethodOutcome outcome;
      if (baseline_cmd->parsed()) {
        if (baseline_method == "bco") {
          outcome = cli::run_bco_baseline(inputs, cfg, cfg.seed);
        } else if (baseline_method == "bc-oracle") {
          outcome = cli::run_bc_oracle_baseline(inputs, cfg, cfg.seed);
        } else {
          outcome = cli::run_iidm_baseline(inputs, cfg, cfg.seed);
        }
      } else {
        const std::string model_path = imitate_cmd->parsed() ? imitate_model : plan_model;
        wm::WorldModel model = model_path.empty()
                                   ? cli::train_cell_model(inputs, cfg, cfg.seed, &dir)
                                   : wm::WorldModel::load(model_path);
        outcome = cli::run_aime_variant(inputs, model, cfg, cfg.seed, &dir);
      }
      nlohmann::ordered_json report = cli::outcome_to_json(outcome);
      report["expert_mean"] = inputs.expert_mean;
      report["random_mean"] = inputs.random_mean;
      write_report(report, cfg.output, "result.json");
      std::cout << outcome.method << ": normalized return " << outcome.normalized << "\n";
      return kExitOk;
    }

    if (evaluate_cmd->parsed()) {
      auto env = cli::make_env(cfg.env);
      env::Task task = env->task(cfg.demo_task);
      std::vector<double> returns;
      nlohmann::ordered_json report;
      // The checkpoint header decides the policy kind.
      bool latent = true;
      try {
        diff::ParamStore::load(eval_policy);
        nlohmann::ordered_json header;
        diff::ParamStore::load(eval_policy, &header);
        latent = header.at("meta").value("kind", std::string()) == "policy";
      } catch (const std::exception&) {
        latent = true;
      }
      if (latent) {
        imitate::LatentPolicy policy = imitate::LatentPolicy::load(eval_policy);
        if (eval_model.empty()) {
          std::cerr << "config error: latent policies need --model\n";
          return kExitConfigError;
        }
        wm::WorldModel model = wm::WorldModel::load(eval_model);
        returns = imitate::deploy_policy(model, policy, *env, task, cfg.eval.episodes, cfg.seed,
                                         cfg.eval.stochastic);
        report["policy_kind"] = "latent";
      } else {
        baselines::StackedObsPolicy policy = baselines::StackedObsPolicy::load(eval_policy);
        returns = baselines::deploy_stacked_policy(policy, *env, task, cfg.eval.episodes,
                                                   cfg.seed, cfg.eval.stochastic);
        report["policy_kind"] = "stacked";
      }
      const double mean = imitate::mean_of(returns);
      report["returns"] = returns;
      report["mean_return"] = mean;
      write_report(report, cfg.output, "evaluate.json");
      std::cout << "mean return " << mean << " over " << returns.size() << " episodes\n";
      return kExitOk;
    }

    if (matrix_cmd->parsed()) {
      std::vector<std::string> tasks = matrix_tasks;
      if (tasks.empty()) tasks = cli::make_env(cfg.env)->task_ids();
      auto report = cli::run_transfer_matrix(cfg, tasks, jobs);
      write_report(report, cfg.output, "matrix.json");
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      auto report = cli::run_demo_sweep(cfg, sweep_counts, jobs);
      write_report(report, cfg.output, "sweep.json");
      return kExitOk;
    }
    if (ablate_cmd->parsed()) {
      auto report = cli::run_ablations(cfg, jobs);
      write_report(report, cfg.output, "ablate.json");
      return kExitOk;
    }
  } catch (const DomainError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& err) {
    std::cerr << "stage failure: " << err.what() << "\n";
    return kExitStageFailure;
  }
  return kExitOk;
}
