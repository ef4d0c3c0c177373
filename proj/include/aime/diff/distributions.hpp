#pragma once

#include <cmath>

#include "aime/diff/ops.hpp"

namespace aime::diff {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Diagonal Gaussian over column vectors; one batch element per column.
/// Mean and stddev live on the tape so distribution parameters stay
/// differentiable. Stddev must be strictly positive and finite.
struct Gaussian {
  Array mean;
  Array stddev;

  Gaussian() = default;
  Gaussian(Array mean_, Array stddev_) : mean(mean_), stddev(stddev_) {
    detail::require_same_tape(mean, stddev, "Gaussian");
    detail::require_same_shape(mean, stddev, "Gaussian");
    if (!stddev.value().allFinite() || stddev.value().minCoeff() <= 0.0) {
      throw DomainError("Gaussian: stddev must be strictly positive and finite");
    }
    if (!mean.value().allFinite()) throw DomainError("Gaussian: mean must be finite");
  }

  Eigen::Index dim() const { return mean.rows(); }
  Eigen::Index batch() const { return mean.cols(); }
};

/// mean + stddev .* noise. Noise is detached: gradients flow to mean and
/// stddev only, never into the noise source.
inline Array rsample(const Gaussian& d, const Array& noise) {
  detail::require_same_shape(d.mean, noise, "rsample");
  return add(d.mean, mul(d.stddev, detach(noise)));
}

/// KL(q || p) summed over dimensions, one value per batch column -> 1 x B.
/// Closed form for diagonal Gaussians.
inline Array kl_diag_gaussian(const Gaussian& q, const Gaussian& p) {
  detail::require_same_tape(q.mean, p.mean, "kl_diag_gaussian");
  detail::require(q.dim() == p.dim() && q.batch() == p.batch(),
                  "kl_diag_gaussian: dimension mismatch");
  Tape& t = *q.mean.tape();
  const int mq = q.mean.id(), sq = q.stddev.id(), mp = p.mean.id(), sp = p.stddev.id();

  const auto& vmq = q.mean.value().array();
  const auto& vsq = q.stddev.value().array();
  const auto& vmp = p.mean.value().array();
  const auto& vsp = p.stddev.value().array();
  Matrix v = ((vsp.log() - vsq.log()) +
              (vsq.square() + (vmq - vmp).square()) / (2.0 * vsp.square()) - 0.5)
                 .colwise()
                 .sum()
                 .matrix();

  const bool tracked =
      q.mean.tracked() || q.stddev.tracked() || p.mean.tracked() || p.stddev.tracked();
  return t.make(std::move(v), tracked, [mq, sq, mp, sp](Tape& tt, int, const Matrix& g) {
    const auto& xmq = tt.value(mq).array();
    const auto& xsq = tt.value(sq).array();
    const auto& xmp = tt.value(mp).array();
    const auto& xsp = tt.value(sp).array();
    const auto grow = g.row(0).array();
    const auto sp2 = xsp.square();
    if (tt.tracked(mq))
      tt.grad_ref(mq).array() += ((xmq - xmp) / sp2).rowwise() * grow;
    if (tt.tracked(mp))
      tt.grad_ref(mp).array() -= ((xmq - xmp) / sp2).rowwise() * grow;
    if (tt.tracked(sq))
      tt.grad_ref(sq).array() += (xsq / sp2 - xsq.inverse()).rowwise() * grow;
    if (tt.tracked(sp))
      tt.grad_ref(sp).array() +=
          (xsp.inverse() - (xsq.square() + (xmq - xmp).square()) / (sp2 * xsp)).rowwise() * grow;
  });
}

/// log N(x; mean, stddev^2) per element -> d x B.
inline Array gaussian_logpdf_elem(const Gaussian& d, const Array& x) {
  detail::require_same_tape(d.mean, x, "gaussian_logpdf");
  detail::require_same_shape(d.mean, x, "gaussian_logpdf");
  Tape& t = *x.tape();
  const int pm = d.mean.id(), ps = d.stddev.id(), px = x.id();

  const auto& vm = d.mean.value().array();
  const auto& vs = d.stddev.value().array();
  const auto& vx = x.value().array();
  Matrix v = (-0.5 * ((vx - vm) / vs).square() - vs.log() - 0.5 * kLogTwoPi).matrix();

  const bool tracked = d.mean.tracked() || d.stddev.tracked() || x.tracked();
  return t.make(std::move(v), tracked, [pm, ps, px](Tape& tt, int, const Matrix& g) {
    const auto& xm = tt.value(pm).array();
    const auto& xs = tt.value(ps).array();
    const auto& xx = tt.value(px).array();
    const auto ga = g.array();
    const auto z = (xx - xm) / xs.square();
    if (tt.tracked(pm)) tt.grad_ref(pm).array() += z * ga;
    if (tt.tracked(px)) tt.grad_ref(px).array() -= z * ga;
    if (tt.tracked(ps))
      tt.grad_ref(ps).array() += ((xx - xm).square() / xs.cube() - xs.inverse()) * ga;
  });
}

/// log N(x; mean, stddev^2) summed over dimensions -> 1 x B.
inline Array gaussian_logpdf(const Gaussian& d, const Array& x) {
  return colwise_sum(gaussian_logpdf_elem(d, x));
}

/// Tanh-squashed diagonal Gaussian: a = tanh(u), u ~ N(mean, stddev^2).
/// Samples always lie in the open interval (-1, 1); tanh rounds to exactly
/// +-1.0 in double precision once |u| > ~19, so samples are clamped to
/// +-(1 - kSampleEps). log_prob applies the change-of-variables correction
/// -sum log(1 - a^2); action arguments with |a| >= 1 are clamped to
/// 1 - kActionEps first (deterministic, documented).
struct TanhGaussian {
  static constexpr double kActionEps = 1e-6;
  static constexpr double kSampleEps = 1e-12;

  Gaussian base;  // pre-tanh distribution

  TanhGaussian() = default;
  TanhGaussian(Array mean, Array stddev) : base(mean, stddev) {}
  explicit TanhGaussian(Gaussian b) : base(std::move(b)) {}

  /// Reparameterized sample tanh(mean + stddev .* noise); gradients flow to
  /// mean and stddev.
  Array sample(const Array& noise) const {
    return clamp(vtanh(rsample(base, noise)), -1.0 + kSampleEps, 1.0 - kSampleEps);
  }

  /// Pre-tanh sample (useful for diagnostics).
  Array pre_tanh_sample(const Array& noise) const { return rsample(base, noise); }

  /// Squashed mode tanh(mean) (used for deterministic evaluation).
  Array mean_action() const {
    return clamp(vtanh(base.mean), -1.0 + kSampleEps, 1.0 - kSampleEps);
  }

  /// log pi(a) summed over action dimensions -> 1 x B.
  Array log_prob(const Array& action) const {
    Array a = clamp(action, -1.0 + kActionEps, 1.0 - kActionEps);
    Array u = vatanh(a);
    Array correction = colwise_sum(vlog(add_scalar(neg(square(a)), 1.0)));
    return sub(gaussian_logpdf(base, u), correction);
  }
};

/// KL between two tanh-Gaussians over the same action space. The tanh map is
/// a shared bijection, so the divergence equals the KL of the underlying
/// Gaussians in pre-tanh space (closed form).
inline Array kl_tanh_gaussian(const TanhGaussian& q, const TanhGaussian& p) {
  return kl_diag_gaussian(q.base, p.base);
}

}  // namespace aime::diff
