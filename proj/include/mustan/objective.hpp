#pragma once

#include <algorithm>
#include <cmath>

#include "mustan/config.hpp"
#include "mustan/tensor.hpp"

namespace mustan {

// Loss value and its gradient with respect to the probability map.
// `degenerate` is set when every pixel is ignored (value 0, zero gradient).
template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  Tensor<Scalar> grad;
  bool degenerate = false;
};

namespace detail {

template <typename Scalar>
void check_loss_inputs(const Tensor<Scalar>& p, const Tensor<Scalar>& y, const Tensor<Scalar>& ignore) {
  if (p.shape() != y.shape() || p.shape() != ignore.shape())
    throw ShapeError("loss inputs disagree: p " + p.shape().str() + ", y " + y.shape().str() +
                     ", ignore " + ignore.shape().str());
}

}  // namespace detail

// 1 - (TP + eps) / (TP + alpha FP + beta FN + eps) over soft counts of the
// non-ignored pixels.
template <typename Scalar>
LossValue<Scalar> tversky_loss(const Tensor<Scalar>& p, const Tensor<Scalar>& y,
                               const Tensor<Scalar>& ignore, const LossConfig& cfg) {
  detail::check_loss_inputs(p, y, ignore);
  LossValue<Scalar> out{Scalar(0), Tensor<Scalar>(p.shape()), false};
  const auto valid = (Scalar(1) - ignore.array());
  if (valid.sum() <= 0) {
    out.degenerate = true;
    return out;
  }
  const auto pv = p.array() * valid;
  const auto yv = y.array() * valid;
  const double tp = (pv * y.array()).template cast<double>().sum();
  const double fp = (pv * (Scalar(1) - y.array())).template cast<double>().sum();
  const double fn = ((Scalar(1) - p.array()) * yv).template cast<double>().sum();
  const double num = tp + cfg.epsilon;
  const double den = tp + cfg.alpha * fp + cfg.beta * fn + cfg.epsilon;
  out.value = static_cast<Scalar>(1.0 - num / den);
  // d/dp of num/den with dTP = y, dFP = 1 - y, dFN = -y (valid pixels only).
  const Scalar inv_den = static_cast<Scalar>(1.0 / den);
  const Scalar ratio = static_cast<Scalar>(num / (den * den));
  const auto d_den = y.array() * Scalar(1 - cfg.beta) + (Scalar(1) - y.array()) * Scalar(cfg.alpha);
  out.grad.array() = -(y.array() * inv_den - d_den * ratio) * valid;
  return out;
}

// Mean binary cross-entropy over non-ignored pixels; p is clamped to
// [eps, 1 - eps] before the logs (zero gradient where clamping is active).
template <typename Scalar>
LossValue<Scalar> bce_loss(const Tensor<Scalar>& p, const Tensor<Scalar>& y, const Tensor<Scalar>& ignore,
                           const LossConfig& cfg) {
  detail::check_loss_inputs(p, y, ignore);
  LossValue<Scalar> out{Scalar(0), Tensor<Scalar>(p.shape()), false};
  const auto valid = (Scalar(1) - ignore.array());
  const double count = valid.template cast<double>().sum();
  if (count <= 0) {
    out.degenerate = true;
    return out;
  }
  const Scalar lo = static_cast<Scalar>(cfg.epsilon);
  const Scalar hi = static_cast<Scalar>(1.0 - cfg.epsilon);
  const auto pc = p.array().max(lo).min(hi);
  const auto terms = -(y.array() * pc.log() + (Scalar(1) - y.array()) * (Scalar(1) - pc).log()) * valid;
  out.value = static_cast<Scalar>(terms.template cast<double>().sum() / count);
  const auto inside = (p.array() >= lo && p.array() <= hi).template cast<Scalar>();
  out.grad.array() = (-(y.array() / pc) + (Scalar(1) - y.array()) / (Scalar(1) - pc)) * valid * inside /
                     static_cast<Scalar>(count);
  return out;
}

// theta * tversky + (1 - theta) * bce
template <typename Scalar>
LossValue<Scalar> combined_loss(const Tensor<Scalar>& p, const Tensor<Scalar>& y, const Tensor<Scalar>& ignore,
                                const LossConfig& cfg) {
  cfg.validate();
  auto tl = tversky_loss(p, y, ignore, cfg);
  auto bce = bce_loss(p, y, ignore, cfg);
  if (cfg.theta == 1.0) return tl;
  if (cfg.theta == 0.0) return bce;
  const Scalar theta = static_cast<Scalar>(cfg.theta);
  LossValue<Scalar> out;
  out.degenerate = tl.degenerate || bce.degenerate;
  out.value = theta * tl.value + (Scalar(1) - theta) * bce.value;
  out.grad = Tensor<Scalar>(p.shape(), theta * tl.grad.array() + (Scalar(1) - theta) * bce.grad.array());
  return out;
}

}  // namespace mustan
