#pragma once

#include "aime/data/sampling.hpp"
#include "aime/diff/adam.hpp"
#include "aime/wm/elbo.hpp"

namespace aime::wm {

struct Phase1Config {
  int epochs = 100;
  int steps_per_epoch = 100;
  int batch = 16;
  int chunk_len = 30;
  double lr = 1e-3;
  double grad_clip = 100.0;
};

void to_json(nlohmann::ordered_json& j, const Phase1Config& cfg);
void from_json(const nlohmann::ordered_json& j, Phase1Config& cfg);

struct EpochStats {
  int epoch = 0;
  double j = 0.0;
  double j_rec = 0.0;
  double j_kl = 0.0;
  double grad_norm = 0.0;
};

/// Writes "epoch,j,j_rec,j_kl,grad_norm" rows.
void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochStats>& log);

/// Maximizes the minibatch sequence objective with Adam over sampled chunks.
/// Exposed as a class so callers can evaluate between epochs (the final
/// parameters always come from the last epoch; there is no early stopping).
class WorldModelTrainer {
 public:
  WorldModelTrainer(WorldModel& model, const data::Dataset& dataset, Phase1Config cfg,
                    std::uint64_t seed);

  EpochStats run_epoch();
  std::vector<EpochStats> run(int epochs);
  int epochs_done() const { return epoch_; }

 private:
  WorldModel* model_;
  const data::Dataset* dataset_;
  Phase1Config cfg_;
  diff::AdamOptimizer optimizer_;
  SeededRng sample_rng_;
  SeededRng noise_rng_;
  diff::Tape tape_;
  int epoch_ = 0;
};

/// Convenience wrapper: fresh model, full run, returns the model and the
/// per-epoch log.
std::pair<WorldModel, std::vector<EpochStats>> train_world_model(const data::Dataset& dataset,
                                                                 const SSMConfig& model_cfg,
                                                                 const Phase1Config& train_cfg,
                                                                 std::uint64_t seed);

}  // namespace aime::wm
