#pragma once

// Numerical primitives shared by every other header: dense types, softmax,
// the random draws used for corruption and dropout, and the Euclidean
// projection onto the probability simplex.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "noisylab/errors.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

/// Dense row-major matrix of doubles. Batches are stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using Label = std::uint32_t;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw InvalidInputError("argmax of an empty vector");
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  return best;
}

/// Numerically stable softmax (max-shifted).
inline Vector softmax(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw InvalidInputError("softmax of an empty vector");
  if (!v.allFinite()) throw InvalidInputError("softmax input has non-finite entries");
  Vector e = (v.array() - v.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Row-wise softmax of a batch of logits.
inline Matrix softmax_rows(const Matrix& logits) {
  if (!logits.allFinite()) throw InvalidInputError("softmax input has non-finite entries");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Uniform draw from the unit simplex in R^c (normalized unit-rate
/// exponentials, i.e. a flat Dirichlet).
inline Vector sample_simplex(Rng& rng, std::size_t c) {
  if (c == 0) throw InvalidInputError("sample_simplex: dimension must be >= 1");
  Vector x(static_cast<Eigen::Index>(c));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.exponential();
  return x / x.sum();
}

/// Mask whose entries are 1 with probability `keep` (the keep probability),
/// else 0. No rescaling is applied.
inline Vector bernoulli_mask(Rng& rng, std::size_t len, double keep) {
  if (!(keep >= 0.0 && keep <= 1.0))
    throw InvalidInputError("bernoulli_mask: keep probability must lie in [0, 1]");
  Vector mask(static_cast<Eigen::Index>(len));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < keep ? 1.0 : 0.0;
  return mask;
}

namespace detail {

inline void check_distribution(const Eigen::Ref<const Vector>& probs, double tol) {
  if (probs.size() == 0) throw InvalidInputError("empty probability vector");
  if (!probs.allFinite()) throw InvalidInputError("probability vector has non-finite entries");
  if (probs.minCoeff() < 0.0) throw InvalidInputError("probability vector has negative entries");
  if (std::abs(probs.sum() - 1.0) > tol)
    throw InvalidInputError("probability vector does not sum to 1");
}

}  // namespace detail

/// Inverse-CDF draw of an index distributed as `probs`.
inline std::size_t sample_categorical(Rng& rng, const Eigen::Ref<const Vector>& probs) {
  detail::check_distribution(probs, 1e-9);
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = static_cast<std::size_t>(i);
    if (u < cumulative) return last_positive;
  }
  // u landed in the rounding gap above the final cumulative sum.
  return last_positive;
}

/// Euclidean projection of v onto {x : x >= 0, sum x = 1} by sorting and
/// thresholding.
inline Vector project_to_simplex(const Eigen::Ref<const Vector>& v) {
  if (v.size() == 0) throw InvalidInputError("project_to_simplex: empty vector");
  if (!v.allFinite()) throw InvalidInputError("project_to_simplex: non-finite entries");
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

/// Projects every column of a square matrix onto the simplex, producing a
/// column-stochastic matrix.
inline Matrix project_columns_to_simplex(const Matrix& m) {
  if (m.rows() != m.cols())
    throw ShapeError("project_columns_to_simplex: matrix must be square");
  if (!m.allFinite()) throw InvalidInputError("project_columns_to_simplex: non-finite entries");
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = project_to_simplex(m.col(j));
  return out;
}

}  // namespace noisylab
