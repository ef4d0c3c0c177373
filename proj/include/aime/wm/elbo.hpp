#pragma once

#include "aime/wm/ssm.hpp"

namespace aime::wm {

/// Stream of noise matrices feeding rsample during filtering. Deterministic
/// given construction, so re-running a build reproduces values bit-exactly.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Matrix next(Eigen::Index rows, Eigen::Index cols) = 0;
};

class GaussianNoise final : public NoiseSource {
 public:
  explicit GaussianNoise(SeededRng& rng) : rng_(&rng) {}
  Matrix next(Eigen::Index rows, Eigen::Index cols) override {
    Matrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng_->normal();
    }
    return m;
  }

 private:
  SeededRng* rng_;
};

/// Mean-path evaluation (s_t = posterior mean).
class ZeroNoise final : public NoiseSource {
 public:
  Matrix next(Eigen::Index rows, Eigen::Index cols) override { return Matrix::Zero(rows, cols); }
};

/// Replays a pre-drawn sequence; grad_check probes reuse one draw so the
/// objective is a deterministic function of the parameters.
class ReplayNoise final : public NoiseSource {
 public:
  explicit ReplayNoise(std::vector<Matrix> draws) : draws_(std::move(draws)) {}
  Matrix next(Eigen::Index rows, Eigen::Index cols) override;
  void rewind() { next_ = 0; }

 private:
  std::vector<Matrix> draws_;
  std::size_t next_ = 0;
};

/// Batched objective terms; scalars are batch means, per_sequence is 1 x B.
/// total = rec + kl holds exactly by construction. kl is the negated
/// (optionally clamped / balanced / scaled) divergence sum, so kl <= 0.
struct ElboTerms {
  Array total;
  Array rec;
  Array kl;
  Array per_sequence;
  std::vector<StateBelief> beliefs;
};

/// Evaluates the sequence objective over a batch of chunks laid out as
/// step-major matrices (see data::ChunkBatch). Throws NumericalError with the
/// failing step index if an intermediate becomes non-finite.
ElboTerms elbo_terms(const SSMArrays& arrays, const SSMConfig& cfg, const std::vector<Array>& obs,
                     const std::vector<Array>& act, NoiseSource& noise);

/// Single-sequence evaluation on a private tape: J, J_rec, J_KL.
struct ElboValues {
  double total = 0.0;
  double rec = 0.0;
  double kl = 0.0;
};
ElboValues elbo(const WorldModel& model, const Matrix& observations, const Matrix& actions,
                NoiseSource& noise);

/// Noise-averaged bound for one sequence: mean and standard error of the
/// per-sample ELBO over `samples` independent noise streams (evaluated as one
/// replicated batch).
struct SampledElbo {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
};
SampledElbo elbo_sampled(const WorldModel& model, const Matrix& observations,
                         const Matrix& actions, int samples, std::uint64_t seed);

}  // namespace aime::wm
