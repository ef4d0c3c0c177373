#pragma once

#include <vector>

#include "aime/diff/param_store.hpp"

namespace aime::diff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 100.0;  // global norm; <= 0 disables
};

/// Adam over a ParamStore. Gradients are read from the tape leaves produced
/// by a TapeBinding of the same store, in store order, so updates are
/// deterministic.
class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore& store, AdamConfig cfg = {});

  /// Applies one descent step from the binding's leaf gradients (callers
  /// maximizing an objective backpropagate its negation). Returns the
  /// pre-clip global gradient norm.
  double step(const TapeBinding& binding);

  int iterations() const { return t_; }

 private:
  ParamStore* store_;
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  int t_ = 0;
};

}  // namespace aime::diff
