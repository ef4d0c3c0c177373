#include "aime/diff/nets.hpp"

#include <cmath>

namespace aime::diff {

namespace {
Matrix glorot_uniform(int rows, int cols, SeededRng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-limit, limit);
    }
  }
  return m;
}
}  // namespace

void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, SeededRng& rng,
              double out_scale) {
  if (spec.in <= 0 || spec.out <= 0) throw DomainError("init_mlp: in/out must be positive");
  std::vector<int> sizes;
  sizes.push_back(spec.in);
  for (int h : spec.hidden) sizes.push_back(h);
  sizes.push_back(spec.out);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const bool last = (k + 2 == sizes.size());
    const double gain = last ? out_scale : 1.0;
    store.add(prefix + ".w" + std::to_string(k),
              glorot_uniform(sizes[k + 1], sizes[k], rng, gain));
    store.add(prefix + ".b" + std::to_string(k), Matrix::Zero(sizes[k + 1], 1));
  }
}

MlpArrays bind_mlp(const TapeBinding& binding, const std::string& prefix) {
  MlpArrays out;
  for (int k = 0;; ++k) {
    const std::string wn = prefix + ".w" + std::to_string(k);
    if (!binding.store().has(wn)) break;
    out.w.push_back(binding[wn]);
    out.b.push_back(binding[prefix + ".b" + std::to_string(k)]);
  }
  if (out.w.empty()) throw DomainError("bind_mlp: no layers under prefix '" + prefix + "'");
  return out;
}

Array mlp_forward(const MlpArrays& params, const Array& x) {
  Array h = x;
  for (std::size_t k = 0; k < params.w.size(); ++k) {
    h = add_colwise(matmul(params.w[k], h), params.b[k]);
    if (k + 1 < params.w.size()) h = elu(h);
  }
  return h;
}

void init_gru(ParamStore& store, const std::string& prefix, const GruSpec& spec, SeededRng& rng) {
  if (spec.in <= 0 || spec.hidden <= 0) throw DomainError("init_gru: sizes must be positive");
  store.add(prefix + ".wx", glorot_uniform(3 * spec.hidden, spec.in, rng, 1.0));
  store.add(prefix + ".wh", glorot_uniform(3 * spec.hidden, spec.hidden, rng, 1.0));
  store.add(prefix + ".bx", Matrix::Zero(3 * spec.hidden, 1));
  store.add(prefix + ".bh", Matrix::Zero(3 * spec.hidden, 1));
}

GruArrays bind_gru(const TapeBinding& binding, const std::string& prefix) {
  return GruArrays{binding[prefix + ".wx"], binding[prefix + ".wh"], binding[prefix + ".bx"],
                   binding[prefix + ".bh"]};
}

Array gru_step(const GruArrays& params, const Array& input, const Array& h) {
  const Eigen::Index H = params.wh.value().cols();
  detail::require(h.rows() == H, "gru_step: hidden state size mismatch");
  detail::require(input.rows() == params.wx.value().cols(), "gru_step: input size mismatch");
  detail::require(input.cols() == h.cols(), "gru_step: batch mismatch");

  Array gx = add_colwise(matmul(params.wx, input), params.bx);
  Array gh = add_colwise(matmul(params.wh, h), params.bh);
  Array r = sigmoid(add(rows(gx, 0, H), rows(gh, 0, H)));
  Array z = sigmoid(add(rows(gx, H, H), rows(gh, H, H)));
  Array n = vtanh(add(rows(gx, 2 * H, H), mul(r, rows(gh, 2 * H, H))));
  // h' = (1 - z) .* n + z .* h
  return add(mul(add_scalar(neg(z), 1.0), n), mul(z, h));
}

Gaussian gaussian_head(const MlpArrays& mlp, const Array& input, double min_std) {
  Array out = mlp_forward(mlp, input);
  const Eigen::Index d = out.rows() / 2;
  detail::require(out.rows() == 2 * d, "gaussian_head: output rows must be even");
  Array mean = rows(out, 0, d);
  Array stddev = add_scalar(softplus(rows(out, d, d)), min_std);
  return Gaussian(mean, stddev);
}

TanhGaussian tanh_gaussian_head(const MlpArrays& mlp, const Array& input, double min_std) {
  return TanhGaussian(gaussian_head(mlp, input, min_std));
}

}  // namespace aime::diff
