#pragma once

#include <cmath>
#include <string>

#include "aime/diff/tape.hpp"

namespace aime::diff {

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

inline void require_same_shape(const Array& a, const Array& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()));
}

inline void require_same_tape(const Array& a, const Array& b, const char* op) {
  require(a.tape() == b.tape(), std::string(op) + ": operands from different tapes");
}

/// Elementwise op: value = fv(x); dvalue/dx = fg(x, y) evaluated elementwise.
template <class FV, class FG>
Array unary(const Array& a, FV&& fv, FG&& fg) {
  Tape& t = *a.tape();
  Matrix v = fv(a.value().array()).matrix();
  const int pa = a.id();
  return t.make(std::move(v), a.tracked(),
                [pa, fg](Tape& tt, int self, const Matrix& g) {
                  tt.grad_ref(pa).array() +=
                      fg(tt.value(pa).array(), tt.value(self).array()) * g.array();
                });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// arithmetic

inline Array add(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "add");
  detail::require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  const int pa = a.id(), pb = b.id();
  return t.make(a.value() + b.value(), a.tracked() || b.tracked(),
                [pa, pb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(pa)) tt.grad_ref(pa) += g;
                  if (tt.tracked(pb)) tt.grad_ref(pb) += g;
                });
}

inline Array sub(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const int pa = a.id(), pb = b.id();
  return t.make(a.value() - b.value(), a.tracked() || b.tracked(),
                [pa, pb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(pa)) tt.grad_ref(pa) += g;
                  if (tt.tracked(pb)) tt.grad_ref(pb) -= g;
                });
}

inline Array mul(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "mul");
  detail::require_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  const int pa = a.id(), pb = b.id();
  return t.make(a.value().cwiseProduct(b.value()), a.tracked() || b.tracked(),
                [pa, pb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(pa)) tt.grad_ref(pa).array() += g.array() * tt.value(pb).array();
                  if (tt.tracked(pb)) tt.grad_ref(pb).array() += g.array() * tt.value(pa).array();
                });
}

inline Array div(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "div");
  detail::require_same_shape(a, b, "div");
  Tape& t = *a.tape();
  const int pa = a.id(), pb = b.id();
  return t.make((a.value().array() / b.value().array()).matrix(), a.tracked() || b.tracked(),
                [pa, pb](Tape& tt, int, const Matrix& g) {
                  const auto& vb = tt.value(pb).array();
                  if (tt.tracked(pa)) tt.grad_ref(pa).array() += g.array() / vb;
                  if (tt.tracked(pb))
                    tt.grad_ref(pb).array() -= g.array() * tt.value(pa).array() / (vb * vb);
                });
}

inline Array neg(const Array& a) {
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make(-a.value(), a.tracked(),
                [pa](Tape& tt, int, const Matrix& g) { tt.grad_ref(pa) -= g; });
}

inline Array scale(const Array& a, double c) {
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make(a.value() * c, a.tracked(),
                [pa, c](Tape& tt, int, const Matrix& g) { tt.grad_ref(pa) += c * g; });
}

inline Array add_scalar(const Array& a, double c) {
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make((a.value().array() + c).matrix(), a.tracked(),
                [pa](Tape& tt, int, const Matrix& g) { tt.grad_ref(pa) += g; });
}

inline Array matmul(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "matmul");
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ (" +
                                            std::to_string(a.cols()) + " vs " +
                                            std::to_string(b.rows()) + ")");
  Tape& t = *a.tape();
  const int pa = a.id(), pb = b.id();
  return t.make(a.value() * b.value(), a.tracked() || b.tracked(),
                [pa, pb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(pa)) tt.grad_ref(pa).noalias() += g * tt.value(pb).transpose();
                  if (tt.tracked(pb)) tt.grad_ref(pb).noalias() += tt.value(pa).transpose() * g;
                });
}

/// x + b with b (r x 1) broadcast across the columns of x.
inline Array add_colwise(const Array& x, const Array& b) {
  detail::require_same_tape(x, b, "add_colwise");
  detail::require(b.cols() == 1 && b.rows() == x.rows(), "add_colwise: bias must be rows(x) x 1");
  Tape& t = *x.tape();
  const int px = x.id(), pb = b.id();
  return t.make(x.value().colwise() + Vector(b.value().col(0)), x.tracked() || b.tracked(),
                [px, pb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(px)) tt.grad_ref(px) += g;
                  if (tt.tracked(pb)) tt.grad_ref(pb) += g.rowwise().sum();
                });
}

/// x * w with w (1 x B) broadcast across the rows of x (per-column weights).
inline Array mul_rowwise(const Array& x, const Array& w) {
  detail::require_same_tape(x, w, "mul_rowwise");
  detail::require(w.rows() == 1 && w.cols() == x.cols(), "mul_rowwise: weights must be 1 x cols(x)");
  Tape& t = *x.tape();
  const int px = x.id(), pw = w.id();
  Matrix v = x.value().array().rowwise() * w.value().row(0).array();
  return t.make(std::move(v), x.tracked() || w.tracked(),
                [px, pw](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(px))
                    tt.grad_ref(px).array() += g.array().rowwise() * tt.value(pw).row(0).array();
                  if (tt.tracked(pw))
                    tt.grad_ref(pw).row(0).array() +=
                        (g.array() * tt.value(px).array()).colwise().sum();
                });
}

// ---------------------------------------------------------------------------
// elementwise nonlinearities

inline Array vexp(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.exp(); },
      [](const auto&, const auto& y) { return y; });
}

inline Array vlog(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.log(); },
      [](const auto& x, const auto&) { return x.inverse(); });
}

inline Array vtanh(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.tanh(); },
      [](const auto&, const auto& y) { return 1.0 - y * y; });
}

inline Array vatanh(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.atanh(); },
      [](const auto& x, const auto&) { return (1.0 - x * x).inverse(); });
}

inline Array vsin(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.sin(); },
      [](const auto& x, const auto&) { return x.cos(); });
}

inline Array square(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return x.square(); },
      [](const auto& x, const auto&) { return 2.0 * x; });
}

inline Array sigmoid(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return 0.5 * (0.5 * x).tanh() + 0.5; },
      [](const auto&, const auto& y) { return y * (1.0 - y); });
}

inline Array elu(const Array& a) {
  return detail::unary(
      a, [](const auto& x) { return (x > 0.0).select(x, x.min(30.0).exp() - 1.0); },
      [](const auto& x, const auto& y) { return (x > 0.0).select(x * 0 + 1.0, y + 1.0); });
}

/// softplus(x) = log(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}).
inline Array softplus(const Array& a) {
  return detail::unary(
      a,
      [](const auto& x) { return x.max(0.0) + (-x.abs()).exp().log1p(); },
      [](const auto& x, const auto&) { return 0.5 * (0.5 * x).tanh() + 0.5; });
}

/// Elementwise clamp; gradient passes through where lo <= x <= hi.
inline Array clamp(const Array& a, double lo, double hi) {
  return detail::unary(
      a, [lo, hi](const auto& x) { return x.max(lo).min(hi); },
      [lo, hi](const auto& x, const auto&) {
        return ((x >= lo) && (x <= hi)).template cast<double>();
      });
}

/// Elementwise max(x, floor); gradient passes through where x >= floor.
inline Array clamp_min(const Array& a, double floor) {
  return detail::unary(
      a, [floor](const auto& x) { return x.max(floor); },
      [floor](const auto& x, const auto&) { return (x >= floor).template cast<double>(); });
}

// ---------------------------------------------------------------------------
// structure

/// Copy of `a` that blocks gradient flow into its ancestors.
inline Array detach(const Array& a) { return a.tape()->constant(a.value()); }

inline Array rows(const Array& a, Eigen::Index r0, Eigen::Index n) {
  detail::require(r0 >= 0 && n >= 0 && r0 + n <= a.rows(), "rows: slice out of range");
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make(a.value().middleRows(r0, n), a.tracked(),
                [pa, r0, n](Tape& tt, int, const Matrix& g) {
                  tt.grad_ref(pa).middleRows(r0, n) += g;
                });
}

inline Array cols(const Array& a, Eigen::Index c0, Eigen::Index n) {
  detail::require(c0 >= 0 && n >= 0 && c0 + n <= a.cols(), "cols: slice out of range");
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make(a.value().middleCols(c0, n), a.tracked(),
                [pa, c0, n](Tape& tt, int, const Matrix& g) {
                  tt.grad_ref(pa).middleCols(c0, n) += g;
                });
}

/// Vertical concatenation (stacks feature rows).
inline Array vcat(const Array& a, const Array& b) {
  detail::require_same_tape(a, b, "vcat");
  detail::require(a.cols() == b.cols(), "vcat: column counts differ");
  Tape& t = *a.tape();
  Matrix v(a.rows() + b.rows(), a.cols());
  v.topRows(a.rows()) = a.value();
  v.bottomRows(b.rows()) = b.value();
  const int pa = a.id(), pb = b.id();
  const Eigen::Index ra = a.rows(), rb = b.rows();
  return t.make(std::move(v), a.tracked() || b.tracked(),
                [pa, pb, ra, rb](Tape& tt, int, const Matrix& g) {
                  if (tt.tracked(pa)) tt.grad_ref(pa) += g.topRows(ra);
                  if (tt.tracked(pb)) tt.grad_ref(pb) += g.bottomRows(rb);
                });
}

inline Array vcat(const Array& a, const Array& b, const Array& c) {
  return vcat(vcat(a, b), c);
}

// ---------------------------------------------------------------------------
// reductions

/// Sum of all elements -> 1x1.
inline Array sum(const Array& a) {
  Tape& t = *a.tape();
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  const int pa = a.id();
  return t.make(std::move(v), a.tracked(), [pa](Tape& tt, int, const Matrix& g) {
    tt.grad_ref(pa).array() += g(0, 0);
  });
}

/// Mean of all elements -> 1x1.
inline Array mean(const Array& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

/// Per-column sum -> 1 x cols.
inline Array colwise_sum(const Array& a) {
  Tape& t = *a.tape();
  const int pa = a.id();
  return t.make(a.value().colwise().sum(), a.tracked(),
                [pa](Tape& tt, int, const Matrix& g) {
                  Matrix& gp = tt.grad_ref(pa);
                  gp.noalias() += Vector::Ones(gp.rows()) * g;
                });
}

/// Per-column mean -> 1 x cols.
inline Array colwise_mean(const Array& a) {
  return scale(colwise_sum(a), 1.0 / static_cast<double>(a.rows()));
}

}  // namespace aime::diff
