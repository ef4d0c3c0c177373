#pragma once

#include <string>
#include <vector>

#include "aime/common/rng.hpp"
#include "aime/diff/distributions.hpp"
#include "aime/diff/ops.hpp"
#include "aime/diff/param_store.hpp"

namespace aime::diff {

// ---------------------------------------------------------------------------
// MLP: ELU on hidden layers, linear output. hidden may be empty, which makes
// the block a single linear map.

struct MlpSpec {
  int in = 0;
  int out = 0;
  std::vector<int> hidden;
};

/// Registers "<prefix>.w<k>" / "<prefix>.b<k>" in the store. Weights use
/// Glorot-uniform init scaled by out_scale (0 zero-initializes the output
/// layer, which parks tanh-Gaussian policy heads at action 0); biases are 0.
void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, SeededRng& rng,
              double out_scale = 1.0);

struct MlpArrays {
  std::vector<Array> w;
  std::vector<Array> b;
  bool empty() const { return w.empty(); }
};

MlpArrays bind_mlp(const TapeBinding& binding, const std::string& prefix);

/// x is (in x B); returns (out x B).
Array mlp_forward(const MlpArrays& params, const Array& x);

// ---------------------------------------------------------------------------
// GRU cell. Gate order in the stacked matrices is reset, update, candidate;
// the update follows the usual convention
//   r = sigmoid(Wr x + Ur h + br),  z = sigmoid(Wz x + Uz h + bz),
//   n = tanh(Wn x + bn + r .* (Un h + cn)),  h' = (1 - z) .* n + z .* h,
// so saturating the update gate (z -> 1) holds the state.

struct GruSpec {
  int in = 0;
  int hidden = 0;
};

void init_gru(ParamStore& store, const std::string& prefix, const GruSpec& spec, SeededRng& rng);

struct GruArrays {
  Array wx;  // 3H x in
  Array wh;  // 3H x H
  Array bx;  // 3H x 1
  Array bh;  // 3H x 1
};

GruArrays bind_gru(const TapeBinding& binding, const std::string& prefix);

/// input (in x B), h (H x B) -> new hidden state (H x B).
Array gru_step(const GruArrays& params, const Array& input, const Array& h);

// ---------------------------------------------------------------------------
// Gaussian head: an MLP whose output splits into mean and raw stddev rows;
// stddev = softplus(raw) + min_std keeps the distribution valid everywhere.

inline constexpr double kMinStddev = 1e-3;

Gaussian gaussian_head(const MlpArrays& mlp, const Array& input, double min_std = kMinStddev);
TanhGaussian tanh_gaussian_head(const MlpArrays& mlp, const Array& input,
                                double min_std = kMinStddev);

}  // namespace aime::diff
