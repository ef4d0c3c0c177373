#include <doctest.h>

#include <cmath>

#include "aime/common/rng.hpp"
#include "aime/diff/adam.hpp"
#include "aime/diff/distributions.hpp"
#include "aime/diff/grad_check.hpp"
#include "aime/diff/nets.hpp"
#include "aime/diff/ops.hpp"

using namespace aime;
using namespace aime::diff;

namespace {

Matrix random_matrix(int r, int c, SeededRng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Composite Simpson quadrature on [a, b].
template <class F>
double simpson(F f, double a, double b, int n /* even */) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("tape: values and gradient accumulation across uses") {
  Tape t;
  Array x = t.leaf(Matrix::Constant(1, 1, 3.0));
  Array y = add(mul(x, x), x);  // x^2 + x; x used three times
  t.backward(sum(y));
  CHECK(y.value()(0, 0) == doctest::Approx(12.0));
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0));  // 2x + 1
}

TEST_CASE("tape: constants block gradient flow") {
  Tape t;
  Array x = t.leaf(Matrix::Constant(2, 1, 1.5));
  Array c = t.constant(Matrix::Constant(2, 1, 2.0));
  Array out = sum(mul(detach(x), c));
  t.backward(out);
  CHECK(x.grad().size() == 0);
}

TEST_CASE("tape: backward rejects non-scalar roots") {
  Tape t;
  Array x = t.leaf(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("ops: shape mismatches are rejected") {
  Tape t;
  Array a = t.leaf(Matrix::Zero(2, 3));
  Array b = t.leaf(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(rows(a, 1, 5), ShapeError);
}

TEST_CASE("mlp_forward: all-zero parameters give zero output") {
  ParamStore store;
  SeededRng rng(7);
  init_mlp(store, "f", MlpSpec{3, 2, {4}}, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store.value(i).setZero();

  Tape t;
  TapeBinding bind(t, store, false);
  Array x = t.constant(random_matrix(3, 5, rng));
  Array y = mlp_forward(bind_mlp(bind, "f"), x);
  CHECK(y.value().isZero(0.0));
}

TEST_CASE("mlp_forward: identity-initialized linear layer is the identity") {
  ParamStore store;
  SeededRng rng(7);
  init_mlp(store, "f", MlpSpec{2, 2, {}}, rng);  // single linear layer
  store.at("f.w0") = Matrix::Identity(2, 2);
  store.at("f.b0").setZero();

  Tape t;
  TapeBinding bind(t, store, false);
  Matrix x(2, 1);
  x << 1.0, 2.0;
  Array y = mlp_forward(bind_mlp(bind, "f"), t.constant(x));
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(1, 0) == 2.0);
}

TEST_CASE("mlp_forward: gradient matches finite differences") {
  SeededRng rng(11);
  ParamStore store;
  SeededRng init_rng(3);
  init_mlp(store, "f", MlpSpec{3, 2, {5, 4}}, init_rng);

  // Check gradient w.r.t. x and every parameter through a scalar readout.
  std::vector<Matrix> point;
  point.push_back(random_matrix(3, 2, rng));
  for (std::size_t i = 0; i < store.size(); ++i) point.push_back(store.value(i));
  const Matrix readout = random_matrix(1, 2, rng);

  auto fn = [&store, readout](Tape& t, const std::vector<Array>& leaves) {
    MlpArrays mlp;
    for (std::size_t i = 1; i < leaves.size(); i += 2) {
      mlp.w.push_back(leaves[i]);
      mlp.b.push_back(leaves[i + 1]);
    }
    Array y = mlp_forward(mlp, leaves[0]);
    return sum(mul(t.constant(readout.replicate(y.rows(), 1)), y));
  };
  auto res = grad_check(fn, point, 1e-5);
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("gru_step: saturated update gate holds the previous state") {
  ParamStore store;
  SeededRng rng(5);
  init_gru(store, "g", GruSpec{3, 4}, rng);
  store.at("g.bx").middleRows(4, 4).setConstant(30.0);  // z -> 1

  Tape t;
  TapeBinding bind(t, store, false);
  Array h = t.constant(random_matrix(4, 2, rng));
  Array x = t.constant(random_matrix(3, 2, rng));
  Array h2 = gru_step(bind_gru(bind, "g"), x, h);
  CHECK((h2.value() - h.value()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("gru_step: zero input, zero state, zero parameters give zero") {
  ParamStore store;
  SeededRng rng(5);
  init_gru(store, "g", GruSpec{2, 3}, rng);
  for (std::size_t i = 0; i < store.size(); ++i) store.value(i).setZero();

  Tape t;
  TapeBinding bind(t, store, false);
  Array h2 = gru_step(bind_gru(bind, "g"), t.constant(Matrix::Zero(2, 1)),
                      t.constant(Matrix::Zero(3, 1)));
  CHECK(h2.value().isZero(0.0));
}

TEST_CASE("gru_step: gradient matches finite differences") {
  SeededRng rng(13);
  ParamStore store;
  SeededRng init_rng(4);
  init_gru(store, "g", GruSpec{3, 4}, init_rng);

  std::vector<Matrix> point{random_matrix(3, 2, rng), random_matrix(4, 2, rng),
                            store.at("g.wx"), store.at("g.wh"),
                            random_matrix(12, 1, rng, 0.2), random_matrix(12, 1, rng, 0.2)};
  auto fn = [](Tape& t, const std::vector<Array>& leaves) {
    GruArrays g{leaves[2], leaves[3], leaves[4], leaves[5]};
    return sum(square(gru_step(g, leaves[0], leaves[1])));
  };
  auto res = grad_check(fn, point, 1e-5);
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("kl_diag_gaussian: identical distributions have zero divergence") {
  Tape t;
  Array m = t.constant(Matrix::Zero(3, 1));
  Array s = t.constant(Matrix::Ones(3, 1));
  Gaussian q(m, s);
  Array kl = kl_diag_gaussian(q, q);
  CHECK(std::abs(kl.value()(0, 0)) <= 1e-12);
}

TEST_CASE("kl_diag_gaussian: unit mean shift equals one half") {
  Tape t;
  Gaussian q(t.constant(Matrix::Ones(1, 1)), t.constant(Matrix::Ones(1, 1)));
  Gaussian p(t.constant(Matrix::Zero(1, 1)), t.constant(Matrix::Ones(1, 1)));
  CHECK(kl_diag_gaussian(q, p).value()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl_diag_gaussian: matches numerical quadrature of the integrand") {
  Tape t;
  Gaussian q(t.constant(Matrix::Zero(1, 1)), t.constant(Matrix::Constant(1, 1, 2.0)));
  Gaussian p(t.constant(Matrix::Zero(1, 1)), t.constant(Matrix::Ones(1, 1)));
  const double kl = kl_diag_gaussian(q, p).value()(0, 0);
  CHECK(kl == doctest::Approx(0.806853).epsilon(1e-5));

  auto log_qpdf = [](double x) { return -0.5 * x * x / 4.0 - 0.5 * std::log(8.0 * M_PI); };
  auto log_ppdf = [](double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); };
  const double quad = simpson(
      [&](double x) { return std::exp(log_qpdf(x)) * (log_qpdf(x) - log_ppdf(x)); }, -40.0, 40.0,
      200000);
  CHECK(kl == doctest::Approx(quad).epsilon(1e-8));
}

TEST_CASE("kl_diag_gaussian: non-negative on random pairs and zero on self") {
  SeededRng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    const int d = 1 + static_cast<int>(rng.uniform_index(6));
    Gaussian q(t.constant(random_matrix(d, 1, rng)),
               t.constant(random_matrix(d, 1, rng).cwiseAbs() + Matrix::Constant(d, 1, 0.05)));
    Gaussian p(t.constant(random_matrix(d, 1, rng)),
               t.constant(random_matrix(d, 1, rng).cwiseAbs() + Matrix::Constant(d, 1, 0.05)));
    CHECK(kl_diag_gaussian(q, p).value()(0, 0) >= 0.0);
    CHECK(std::abs(kl_diag_gaussian(q, q).value()(0, 0)) <= 1e-12);
  }
}

TEST_CASE("kl_diag_gaussian: dimension mismatch rejected") {
  Tape t;
  Gaussian q(t.constant(Matrix::Zero(2, 1)), t.constant(Matrix::Ones(2, 1)));
  Gaussian p(t.constant(Matrix::Zero(3, 1)), t.constant(Matrix::Ones(3, 1)));
  CHECK_THROWS_AS(kl_diag_gaussian(q, p), ShapeError);
}

TEST_CASE("kl and logpdf: fused backward passes match finite differences") {
  SeededRng rng(23);
  std::vector<Matrix> point{random_matrix(3, 2, rng), random_matrix(3, 2, rng, 0.5),
                            random_matrix(3, 2, rng), random_matrix(3, 2, rng, 0.5),
                            random_matrix(3, 2, rng)};
  auto kl_fn = [](Tape& t, const std::vector<Array>& v) {
    Gaussian q(v[0], add_scalar(softplus(v[1]), 1e-3));
    Gaussian p(v[2], add_scalar(softplus(v[3]), 1e-3));
    return sum(kl_diag_gaussian(q, p));
  };
  CHECK(grad_check(kl_fn, point, 1e-5).max_rel_err <= 1e-6);

  auto lp_fn = [](Tape& t, const std::vector<Array>& v) {
    Gaussian d(v[0], add_scalar(softplus(v[1]), 1e-3));
    return sum(gaussian_logpdf(d, v[4]));
  };
  CHECK(grad_check(lp_fn, point, 1e-5).max_rel_err <= 1e-6);
}

TEST_CASE("rsample: zero noise returns the mean, unit noise shifts by stddev") {
  Tape t;
  Matrix mean = Matrix::Constant(3, 1, 0.7);
  Gaussian d(t.constant(mean), t.constant(Matrix::Ones(3, 1)));
  CHECK((rsample(d, t.constant(Matrix::Zero(3, 1))).value() - mean).isZero(0.0));
  CHECK((rsample(d, t.constant(Matrix::Ones(3, 1))).value() - (mean.array() + 1.0).matrix())
            .isZero(0.0));
}

TEST_CASE("rsample: deterministic given noise and unbiased over many draws") {
  Tape t;
  const double mu = 0.3, sd = 1.7;
  Gaussian d(t.constant(Matrix::Constant(1, 1, mu)), t.constant(Matrix::Constant(1, 1, sd)));

  SeededRng rng(29);
  const int n = 100000;
  Matrix noise(1, n);
  for (int i = 0; i < n; ++i) noise(0, i) = rng.normal();
  Gaussian db(t.constant(Matrix::Constant(1, n, mu)), t.constant(Matrix::Constant(1, n, sd)));
  Array s1 = rsample(db, t.constant(noise));
  Array s2 = rsample(db, t.constant(noise));
  CHECK(s1.value() == s2.value());  // bit-identical

  const double emp_mean = s1.value().mean();
  const double se = sd / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(emp_mean - mu) <= 4.0 * se);
}

TEST_CASE("rsample: gradients reach mean and stddev but not the noise") {
  Tape t;
  Array mean = t.leaf(Matrix::Zero(2, 1));
  Array stddev = t.leaf(Matrix::Ones(2, 1));
  Array noise = t.leaf(Matrix::Ones(2, 1));
  Array s = rsample(Gaussian(mean, stddev), noise);
  t.backward(sum(s));
  CHECK(mean.grad().size() != 0);
  CHECK(stddev.grad().size() != 0);
  CHECK(noise.grad().size() == 0);
}

TEST_CASE("Gaussian: non-positive stddev rejected at construction") {
  Tape t;
  CHECK_THROWS_AS(Gaussian(t.constant(Matrix::Zero(2, 1)), t.constant(Matrix::Zero(2, 1))),
                  DomainError);
}

TEST_CASE("tanh_gaussian: zero mean and noise sample at zero with Gaussian density") {
  Tape t;
  TanhGaussian d(t.constant(Matrix::Zero(1, 1)), t.constant(Matrix::Constant(1, 1, 0.9)));
  Array s = d.sample(t.constant(Matrix::Zero(1, 1)));
  CHECK(s.value()(0, 0) == 0.0);
  // At a = 0 the change-of-variables correction vanishes.
  const double lp = d.log_prob(t.constant(Matrix::Zero(1, 1))).value()(0, 0);
  const double expected = -std::log(0.9) - 0.5 * std::log(2.0 * M_PI);
  CHECK(lp == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("tanh_gaussian: samples stay inside the open unit interval") {
  SeededRng rng(31);
  Tape t;
  for (int trial = 0; trial < 100; ++trial) {
    TanhGaussian d(t.constant(random_matrix(4, 3, rng, 10.0)),
                   t.constant(random_matrix(4, 3, rng).cwiseAbs() + Matrix::Constant(4, 3, 0.01)));
    Array s = d.sample(t.constant(random_matrix(4, 3, rng, 3.0)));
    CHECK(s.value().cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("tanh_gaussian: density integrates to one over (-1, 1)") {
  Tape t;
  TanhGaussian d(t.constant(Matrix::Constant(1, 1, 0.3)),
                 t.constant(Matrix::Constant(1, 1, 0.8)));
  auto density = [&](double a) {
    return std::exp(d.log_prob(t.constant(Matrix::Constant(1, 1, a))).value()(0, 0));
  };
  const double mass = simpson(density, -1.0 + 1e-9, 1.0 - 1e-9, 20000);
  CHECK(std::abs(mass - 1.0) <= 1e-4);
}

TEST_CASE("tanh_gaussian: out-of-range log_prob arguments are clamped deterministically") {
  Tape t;
  TanhGaussian d(t.constant(Matrix::Zero(1, 1)), t.constant(Matrix::Ones(1, 1)));
  const double at_edge = d.log_prob(t.constant(Matrix::Constant(1, 1, 1.0))).value()(0, 0);
  const double clamped = d.log_prob(t.constant(Matrix::Constant(1, 1, 1.0 - 1e-6))).value()(0, 0);
  CHECK(std::isfinite(at_edge));
  CHECK(at_edge == clamped);
}

TEST_CASE("grad_check: quadratic has derivative six at three") {
  auto fn = [](Tape& t, const std::vector<Array>& v) { return sum(mul(v[0], v[0])); };
  auto res = grad_check(fn, {Matrix::Constant(1, 1, 3.0)}, 1e-5);
  CHECK(res.max_rel_err <= 1e-9);
  CHECK(res.analytic == doctest::Approx(6.0));
}

TEST_CASE("grad_check: sum of sines on a random vector") {
  SeededRng rng(37);
  auto fn = [](Tape& t, const std::vector<Array>& v) { return sum(vsin(v[0])); };
  auto res = grad_check(fn, {random_matrix(6, 1, rng)}, 1e-5);
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("grad_check: non-finite values raise a diagnostic error") {
  auto fn = [](Tape& t, const std::vector<Array>& v) { return sum(vlog(v[0])); };
  CHECK_THROWS_AS(grad_check(fn, {Matrix::Constant(1, 1, -1.0)}, 1e-5), NumericalError);
}

TEST_CASE("elementwise nonlinearities: gradients match finite differences") {
  SeededRng rng(41);
  const Matrix x = random_matrix(5, 3, rng);
  auto check = [&](auto op, double tol = 1e-6) {
    auto fn = [op](Tape& t, const std::vector<Array>& v) { return sum(op(v[0])); };
    CHECK(grad_check(fn, {x}, 1e-5).max_rel_err <= tol);
  };
  check([](const Array& a) { return elu(a); });
  check([](const Array& a) { return sigmoid(a); });
  check([](const Array& a) { return softplus(a); });
  check([](const Array& a) { return vtanh(a); });
  check([](const Array& a) { return vexp(a); });
  check([](const Array& a) { return square(a); });
  check([](const Array& a) { return vlog(add_scalar(square(a), 1.0)); });
  check([](const Array& a) { return vatanh(scale(vtanh(a), 0.99)); });
  check([](const Array& a) { return colwise_sum(mul_rowwise(square(a), colwise_mean(a))); });
}

TEST_CASE("adam: converges on a convex quadratic and clips huge gradients") {
  ParamStore store;
  store.add("x", Matrix::Constant(2, 1, 5.0));
  AdamConfig cfg;
  cfg.lr = 0.05;
  AdamOptimizer opt(store, cfg);
  Tape t;
  for (int i = 0; i < 400; ++i) {
    t.clear();
    TapeBinding bind(t, store, true);
    Array loss = sum(square(bind["x"]));
    t.backward(loss);
    opt.step(bind);
  }
  CHECK(store.at("x").cwiseAbs().maxCoeff() <= 1e-3);

  // Norm clipping caps the applied update.
  ParamStore big;
  big.add("x", Matrix::Constant(1, 1, 0.0));
  AdamConfig c2;
  c2.grad_clip = 1.0;
  AdamOptimizer o2(big, c2);
  t.clear();
  TapeBinding bind(t, big, true);
  Array loss = scale(sum(bind["x"]), 1e6);
  t.backward(loss);
  const double norm = o2.step(bind);
  CHECK(norm == doctest::Approx(1e6));
  CHECK(std::abs(big.at("x")(0, 0)) <= c2.lr * 1.0 + 1e-12);
}
