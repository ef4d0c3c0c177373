#pragma once

#include "aime/cli/config.hpp"
#include "aime/imitate/deploy.hpp"

namespace aime::cli {

/// Everything a method run needs: the environment, datasets, and the
/// normalization anchors (scripted expert = 100, uniform random = 0),
/// evaluated on the shared evaluation seed stream so method comparisons are
/// paired.
struct CellInputs {
  std::shared_ptr<env::Env> env;
  env::Task demo_task;
  data::Dataset body;         // embodiment experience (with actions)
  data::Dataset demo_hidden;  // demonstrations with their true actions (evaluation only)
  data::Dataset demo;         // action-free demonstrations
  double expert_mean = 0.0;
  double random_mean = 0.0;
};

CellInputs prepare_inputs(const ExperimentConfig& cfg, std::uint64_t seed);

/// Outcome of one (method, cell, seed) run.
struct MethodOutcome {
  std::string method;
  std::vector<double> returns;
  double mean_return = 0.0;
  double normalized = 0.0;
  double raw_expert_ratio = 0.0;
  nlohmann::ordered_json detail;
};

nlohmann::ordered_json outcome_to_json(const MethodOutcome& outcome);

/// Phase 1 on the cell's embodiment data (logs to `outdir` when given).
wm::WorldModel train_cell_model(const CellInputs& inputs, const ExperimentConfig& cfg,
                                std::uint64_t seed, const std::filesystem::path* outdir);

/// Phase 2 + evaluation for the configured variant (aime, aime-idm, plan) on
/// a pre-trained model.
MethodOutcome run_aime_variant(const CellInputs& inputs, const wm::WorldModel& model,
                               const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::filesystem::path* outdir);

MethodOutcome run_bco_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                               std::uint64_t seed);
MethodOutcome run_bc_oracle_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                                     std::uint64_t seed);
MethodOutcome run_iidm_baseline(const CellInputs& inputs, const ExperimentConfig& cfg,
                                std::uint64_t seed);

/// Full single-cell pipeline: collect, train, imitate, evaluate, report.
/// Writes config.json, summary.json, curves and checkpoints under the
/// resolved output directory; summary.json is byte-identical across reruns
/// with the same config (wall-clock timings go to timing.json, which is
/// excluded from that contract). Stage failures produce a partial summary
/// with a failed-stage marker and rethrow.
nlohmann::ordered_json run_pipeline(const ExperimentConfig& cfg);

/// Embodiment-task x demonstration-task grid of the configured variant.
/// Cells share the evaluation protocol; the report carries per-cell values
/// and row/column averages.
nlohmann::ordered_json run_transfer_matrix(const ExperimentConfig& cfg,
                                           const std::vector<std::string>& tasks, int jobs = 1);

/// Demonstration-count sweep of {aime, bco, bc-oracle} over the config's
/// seed list. Counts must be ascending.
nlohmann::ordered_json run_demo_sweep(const ExperimentConfig& cfg,
                                      const std::vector<int>& demo_counts, int jobs = 1);

/// Ablation suite {aime, rec-only, kl-only, aime-idm, iidm, bco} on one
/// transfer setting with a mixed embodiment dataset (all tasks of the
/// embodiment).
nlohmann::ordered_json run_ablations(const ExperimentConfig& cfg, int jobs = 1);

/// Collects every summary.json under `root` into a table (method,
/// normalized return) printed to stdout; returns the number of reports.
int print_reports(const std::filesystem::path& root);

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace aime::cli
