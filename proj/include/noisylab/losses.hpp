#pragma once

// The four training objectives on a batch of logits H (one row per sample).
// Each returns the mean loss and its exact gradients. Log-likelihoods of a
// linear head are floored at kLogFloor; a floored term contributes no
// gradient and is counted in `clamped`.

#include <cmath>
#include <span>
#include <string>

#include "noisylab/errors.hpp"
#include "noisylab/math.hpp"
#include "noisylab/noise.hpp"

namespace noisylab {

inline constexpr double kLogFloor = 1e-12;

struct LossResult {
  double value = 0.0;
  Matrix dlogits;
  Matrix dhead;  // dL/dPsi_hat (trace) or dL/dW (softmax head); empty otherwise
  std::size_t clamped = 0;
};

namespace detail {

inline void check_labels(const Matrix& h, std::span<const Label> labels) {
  if (h.rows() == 0) throw InvalidInputError("loss on an empty batch");
  if (static_cast<std::size_t>(h.rows()) != labels.size())
    throw ShapeError("loss: " + std::to_string(h.rows()) + " logit rows but " +
                     std::to_string(labels.size()) + " labels");
  for (auto y : labels)
    if (y >= static_cast<std::size_t>(h.cols()))
      throw InvalidInputError("label " + std::to_string(y) + " out of range");
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

/// Backprop dL/dP through P = softmax(H), row by row.
inline Matrix softmax_backward(const Matrix& probs, const Matrix& dprobs) {
  const Eigen::VectorXd inner = probs.cwiseProduct(dprobs).rowwise().sum();
  Matrix out = dprobs;
  out.colwise() -= inner;
  return probs.cwiseProduct(out);
}

/// Shared body of the linear-head losses: -mean log [M sigma(h)]_{y}.
inline LossResult linear_head_loss(const Matrix& h, const Matrix& head,
                                   std::span<const Label> labels, bool want_head_grad) {
  check_labels(h, labels);
  if (head.rows() != h.cols() || head.cols() != h.cols())
    throw ShapeError("linear noise head must be C x C");
  const auto n = h.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix probs = softmax_rows(h);
  LossResult r;
  Matrix dprobs = Matrix::Zero(n, h.cols());
  if (want_head_grad) r.dhead = Matrix::Zero(head.rows(), head.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    const double q = head.row(y).dot(probs.row(i));
    if (!(q > kLogFloor)) {
      ++r.clamped;
      total -= std::log(kLogFloor);
      continue;
    }
    total -= std::log(q);
    const double scale = -inv_n / q;
    dprobs.row(i) = scale * head.row(y);
    if (want_head_grad) r.dhead.row(y) += scale * probs.row(i);
  }
  r.value = total * inv_n;
  r.dlogits = softmax_backward(probs, dprobs);
  return r;
}

}  // namespace detail

/// Cross-entropy of the base model against the noisy labels.
inline LossResult loss_base(const Matrix& h, std::span<const Label> labels) {
  detail::check_labels(h, labels);
  const auto n = h.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossResult r;
  r.dlogits = softmax_rows(h);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    total += detail::log_sum_exp(h.row(i)) - h(i, y);
    r.dlogits(i, y) -= 1.0;
  }
  r.dlogits *= inv_n;
  r.value = total * inv_n;
  return r;
}

/// Cross-entropy through the known linear noise head psi * sigma(h).
inline LossResult loss_true_noise(const Matrix& h, const NoiseMatrix& psi,
                                  std::span<const Label> labels) {
  return detail::linear_head_loss(h, psi.matrix(), labels, false);
}

/// Cross-entropy through a learned linear head plus lambda * trace(psi_hat).
/// `dhead` is dL/dpsi_hat. The caller projects psi_hat back onto the
/// stochastic matrices after every update.
inline LossResult loss_trace(const Matrix& h, const Matrix& psi_hat,
                             std::span<const Label> labels, double lambda) {
  if (!std::isfinite(lambda)) throw InvalidInputError("trace penalty weight must be finite");
  LossResult r = detail::linear_head_loss(h, psi_hat, labels, true);
  r.value += lambda * psi_hat.trace();
  r.dhead.diagonal().array() += lambda;
  return r;
}

/// Cross-entropy through g = softmax(W (a .* sigma(h))) with one mask `a`
/// shared by the whole batch. `dhead` is dL/dW.
inline LossResult loss_softmax_dropout(const Matrix& h, const Matrix& w,
                                       std::span<const Label> labels,
                                       const Eigen::Ref<const Vector>& mask) {
  detail::check_labels(h, labels);
  if (w.rows() != h.cols() || w.cols() != h.cols())
    throw ShapeError("softmax noise head must be C x C");
  if (mask.size() != h.cols()) throw ShapeError("dropout mask length must equal C");
  const auto n = h.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix probs = softmax_rows(h);
  const Matrix masked = probs * mask.asDiagonal();
  const Matrix z = masked * w.transpose();
  Matrix dz = softmax_rows(z);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    total += detail::log_sum_exp(z.row(i)) - z(i, y);
    dz(i, y) -= 1.0;
  }
  dz *= inv_n;
  LossResult r;
  r.value = total * inv_n;
  r.dhead.noalias() = dz.transpose() * masked;
  const Matrix dprobs = (dz * w) * mask.asDiagonal();
  r.dlogits = detail::softmax_backward(probs, dprobs);
  return r;
}

}  // namespace noisylab
