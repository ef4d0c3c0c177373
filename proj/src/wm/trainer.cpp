#include "aime/wm/trainer.hpp"

#include <cmath>

#include "aime/common/csv.hpp"

namespace aime::wm {

using namespace aime::diff;

void to_json(nlohmann::ordered_json& j, const Phase1Config& cfg) {
  j = nlohmann::ordered_json{{"epochs", cfg.epochs},
                             {"steps_per_epoch", cfg.steps_per_epoch},
                             {"batch", cfg.batch},
                             {"chunk_len", cfg.chunk_len},
                             {"lr", cfg.lr},
                             {"grad_clip", cfg.grad_clip}};
}

void from_json(const nlohmann::ordered_json& j, Phase1Config& cfg) {
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.chunk_len = j.value("chunk_len", cfg.chunk_len);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
}

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochStats>& log) {
  CsvWriter csv(path.string(), {"epoch", "j", "j_rec", "j_kl", "grad_norm"});
  for (const EpochStats& e : log) {
    csv.row({static_cast<double>(e.epoch), e.j, e.j_rec, e.j_kl, e.grad_norm});
  }
}

WorldModelTrainer::WorldModelTrainer(WorldModel& model, const data::Dataset& dataset,
                                     Phase1Config cfg, std::uint64_t seed)
    : model_(&model),
      dataset_(&dataset),
      cfg_(cfg),
      optimizer_(model.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip}),
      sample_rng_(derive_seed(seed, "wm-sample")),
      noise_rng_(derive_seed(seed, "wm-noise")) {
  if (!dataset.has_actions()) throw DomainError("train_world_model: dataset has no actions");
  if (cfg.chunk_len > dataset.min_length()) {
    throw DomainError("train_world_model: chunk length exceeds shortest trajectory");
  }
}

EpochStats WorldModelTrainer::run_epoch() {
  const SSMConfig& cfg = model_->config();
  EpochStats stats;
  stats.epoch = ++epoch_;
  for (int step = 0; step < cfg_.steps_per_epoch; ++step) {
    tape_.clear();
    TapeBinding binding(tape_, model_->params(), true);
    SSMArrays arrays = bind_ssm(binding, cfg);

    data::ChunkBatch chunk =
        data::sample_chunks(*dataset_, cfg_.batch, cfg_.chunk_len, sample_rng_, true);
    std::vector<Array> obs, act;
    obs.reserve(chunk.obs.size());
    act.reserve(chunk.act.size());
    for (const Matrix& m : chunk.obs) obs.push_back(tape_.constant(m));
    for (const Matrix& m : chunk.act) act.push_back(tape_.constant(m));

    GaussianNoise noise(noise_rng_);
    ElboTerms terms;
    try {
      terms = elbo_terms(arrays, cfg, obs, act, noise);
    } catch (const NumericalError& err) {
      throw TrainingDiverged(std::string("train_world_model: ") + err.what(), epoch_, step);
    }
    const double j = terms.total.value()(0, 0);
    if (!std::isfinite(j)) {
      throw TrainingDiverged("train_world_model: objective diverged", epoch_, step);
    }
    tape_.backward(neg(terms.total));
    const double grad_norm = optimizer_.step(binding);

    stats.j += j;
    stats.j_rec += terms.rec.value()(0, 0);
    stats.j_kl += terms.kl.value()(0, 0);
    stats.grad_norm += grad_norm;
  }
  const double inv = 1.0 / static_cast<double>(cfg_.steps_per_epoch);
  stats.j *= inv;
  stats.j_rec *= inv;
  stats.j_kl *= inv;
  stats.grad_norm *= inv;
  return stats;
}

std::vector<EpochStats> WorldModelTrainer::run(int epochs) {
  std::vector<EpochStats> log;
  log.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) log.push_back(run_epoch());
  return log;
}

std::pair<WorldModel, std::vector<EpochStats>> train_world_model(const data::Dataset& dataset,
                                                                 const SSMConfig& model_cfg,
                                                                 const Phase1Config& train_cfg,
                                                                 std::uint64_t seed) {
  WorldModel model(model_cfg, seed);
  WorldModelTrainer trainer(model, dataset, train_cfg, seed);
  std::vector<EpochStats> log = trainer.run(train_cfg.epochs);
  return {std::move(model), std::move(log)};
}

}  // namespace aime::wm
