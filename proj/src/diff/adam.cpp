#include "aime/diff/adam.hpp"

#include <cmath>

namespace aime::diff {

AdamOptimizer::AdamOptimizer(ParamStore& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.push_back(Matrix::Zero(store.value(i).rows(), store.value(i).cols()));
    v_.push_back(Matrix::Zero(store.value(i).rows(), store.value(i).cols()));
  }
}

double AdamOptimizer::step(const TapeBinding& binding) {
  if (&binding.store() != store_) throw DomainError("AdamOptimizer: binding targets another store");
  const auto& leaves = binding.leaves();

  double sq_norm = 0.0;
  for (const Array& leaf : leaves) {
    const Matrix& g = leaf.grad();
    if (g.size() != 0) sq_norm += g.squaredNorm();
  }
  if (!std::isfinite(sq_norm)) throw NumericalError("AdamOptimizer: non-finite gradient");
  const double norm = std::sqrt(sq_norm);
  const double rescale =
      (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Matrix& raw = leaves[i].grad();
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    if (raw.size() == 0) {
      m *= cfg_.beta1;
      v *= cfg_.beta2;
    } else {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * rescale * raw;
      v.array() = cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * (rescale * raw.array()).square();
    }
    store_->value(i).array() -=
        cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
  }
  return norm;
}

}  // namespace aime::diff
