#pragma once

// Label-noise models: construction of the flip matrix Psi, synthetic label
// corruption, the softmax noise head with its dropout mask, the fixed linear
// head, and extraction of the noise matrix a softmax head implies.
//
// Psi is column-stochastic with Psi(i, j) = p(noisy label = i | true = j).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "noisylab/errors.hpp"
#include "noisylab/math.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

inline constexpr double kStochasticTolerance = 1e-9;

/// Column-stochastic C x C matrix. Construction validates the invariant.
class NoiseMatrix {
 public:
  explicit NoiseMatrix(Matrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw ShapeError("noise matrix must be square and non-empty");
    if (!m_.allFinite()) throw InvalidInputError("noise matrix has non-finite entries");
    if (m_.minCoeff() < 0.0) throw InvalidInputError("noise matrix has negative entries");
    for (Eigen::Index j = 0; j < m_.cols(); ++j)
      if (std::abs(m_.col(j).sum() - 1.0) > kStochasticTolerance)
        throw InvalidInputError("noise matrix column " + std::to_string(j) +
                                " does not sum to 1");
  }

  static NoiseMatrix identity(std::size_t c) {
    const auto n = static_cast<Eigen::Index>(c);
    return NoiseMatrix(Matrix::Identity(n, n));
  }

  std::size_t classes() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  auto column(std::size_t j) const { return m_.col(static_cast<Eigen::Index>(j)); }

  friend bool operator==(const NoiseMatrix& a, const NoiseMatrix& b) { return a.m_ == b.m_; }

 private:
  Matrix m_;
};

enum class NoiseFamily { uniform, nonuniform };

inline const char* to_string(NoiseFamily f) {
  return f == NoiseFamily::uniform ? "uniform" : "nonuniform";
}

inline NoiseFamily parse_noise_family(const std::string& s) {
  if (s == "uniform") return NoiseFamily::uniform;
  if (s == "nonuniform" || s == "non-uniform") return NoiseFamily::nonuniform;
  throw InvalidInputError("unknown noise family '" + s + "'");
}

/// Parametric noise model. `seed` fixes Delta for the non-uniform family.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::uniform;
  double p = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {
inline void check_noise_args(std::size_t c, double p) {
  if (c < 2) throw InvalidInputError("noise matrix needs at least 2 classes");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInputError("noise level p must lie in [0, 1]");
}
}  // namespace detail

/// (1 - p) I + (p / c) 11^T: keep the label with probability 1 - p, otherwise
/// replace it with a uniformly drawn class.
inline NoiseMatrix build_uniform_psi(std::size_t c, double p) {
  detail::check_noise_args(c, p);
  const auto n = static_cast<Eigen::Index>(c);
  Matrix m = Matrix::Constant(n, n, p / static_cast<double>(c));
  m.diagonal().array() += 1.0 - p;
  return NoiseMatrix(std::move(m));
}

/// (1 - p) I + p Delta, each column of Delta an independent uniform draw from
/// the unit simplex. Delta is fixed by the generator state.
inline NoiseMatrix build_nonuniform_psi(std::size_t c, double p, Rng& rng) {
  detail::check_noise_args(c, p);
  const auto n = static_cast<Eigen::Index>(c);
  Matrix delta(n, n);
  for (Eigen::Index j = 0; j < n; ++j) delta.col(j) = sample_simplex(rng, c);
  Matrix m = p * delta;
  m.diagonal().array() += 1.0 - p;
  return NoiseMatrix(std::move(m));
}

inline NoiseMatrix build_psi(const NoiseSpec& spec, std::size_t c) {
  if (spec.family == NoiseFamily::uniform) return build_uniform_psi(c, spec.p);
  Rng rng(spec.seed);
  return build_nonuniform_psi(c, spec.p, rng);
}

/// Draws each noisy label independently from column `labels[i]` of psi.
inline std::vector<Label> corrupt_labels(std::span<const Label> labels, const NoiseMatrix& psi,
                                         Rng& rng) {
  std::vector<Label> noisy(labels.size());
  const std::size_t c = psi.classes();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= c)
      throw InvalidInputError("label " + std::to_string(labels[i]) + " out of range for " +
                              std::to_string(c) + " classes");
    noisy[i] = static_cast<Label>(sample_categorical(rng, psi.column(labels[i])));
  }
  return noisy;
}

/// Softmax noise head: g = softmax(W (a .* sigma(h))). W is unconstrained;
/// `keep` is the per-entry keep probability of the dropout mask a.
struct SoftmaxNoiseHead {
  Matrix w;
  double keep = 0.1;

  /// W = 0 (uniform equivalent noise matrix).
  static SoftmaxNoiseHead zeros(std::size_t c, double keep) {
    if (!(keep >= 0.0 && keep <= 1.0))
      throw InvalidInputError("keep probability must lie in [0, 1]");
    const auto n = static_cast<Eigen::Index>(c);
    return {Matrix::Zero(n, n), keep};
  }
};

namespace detail {
inline void check_head_shapes(const Matrix& w, Eigen::Index probs_len, Eigen::Index mask_len) {
  if (w.rows() != w.cols()) throw ShapeError("noise head weight must be square");
  if (probs_len != w.cols() || mask_len != w.cols())
    throw ShapeError("noise head: probability/mask length does not match C");
}
}  // namespace detail

inline Vector noise_head_forward(const SoftmaxNoiseHead& head,
                                 const Eigen::Ref<const Vector>& base_probs,
                                 const Eigen::Ref<const Vector>& mask) {
  detail::check_head_shapes(head.w, base_probs.size(), mask.size());
  return softmax(head.w * mask.cwiseProduct(base_probs));
}

struct NoiseHeadGradients {
  Matrix dw;
  Vector dprobs;
};

/// Gradients of a loss through g = softmax(W (a .* p)) given dL/dg, with the
/// mask held constant. Masked-out coordinates of dL/dp are exactly zero.
inline NoiseHeadGradients noise_head_backward(const SoftmaxNoiseHead& head,
                                              const Eigen::Ref<const Vector>& base_probs,
                                              const Eigen::Ref<const Vector>& mask,
                                              const Eigen::Ref<const Vector>& dloss_dg) {
  detail::check_head_shapes(head.w, base_probs.size(), mask.size());
  if (dloss_dg.size() != head.w.rows()) throw ContractError("noise head: dL/dg has wrong length");
  const Vector u = mask.cwiseProduct(base_probs);
  const Vector g = softmax(head.w * u);
  const Vector dz = g.cwiseProduct((dloss_dg.array() - g.dot(dloss_dg)).matrix());
  NoiseHeadGradients out;
  out.dw = dz * u.transpose();
  out.dprobs = mask.cwiseProduct(head.w.transpose() * dz);
  return out;
}

/// Column j is softmax(W e_j) = softmax of column j of W.
inline NoiseMatrix extract_equivalent_noise(const Matrix& w) {
  if (w.rows() != w.cols()) throw ShapeError("extract_equivalent_noise: W must be square");
  if (!w.allFinite()) throw InvalidInputError("extract_equivalent_noise: non-finite entries");
  Matrix m(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) m.col(j) = softmax(w.col(j));
  return NoiseMatrix(std::move(m));
}

/// Softmax-head weights reproducing psi: log psi, with probabilities clamped
/// at `floor` first.
inline Matrix log_noise_weights(const NoiseMatrix& psi, double floor = 1e-12) {
  return psi.matrix().array().max(floor).log().matrix();
}

inline double average_diagonal(const NoiseMatrix& psi) {
  return psi.matrix().diagonal().mean();
}

/// psi * p. Maps the simplex into itself, so no renormalization follows.
inline Vector apply_fixed_linear_head(const NoiseMatrix& psi,
                                      const Eigen::Ref<const Vector>& base_probs) {
  if (base_probs.size() != static_cast<Eigen::Index>(psi.classes()))
    throw ShapeError("apply_fixed_linear_head: probability length does not match C");
  return psi.matrix() * base_probs;
}

// ---------------------------------------------------------------------------
// Serialization: CSV with 17 significant digits, and an 8-bit binary PGM
// heatmap scaled linearly from 0 (black) to the largest entry (white).

inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  std::ostringstream line;
  line.imbue(std::locale::classic());
  line << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.str({});
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) line << ',';
      line << m(i, j);
    }
    os << line.str() << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    cells.imbue(std::locale::classic());
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos)
          throw FormatError("matrix CSV: bad number '" + cell + "'");
      } catch (const std::logic_error&) {
        throw FormatError("matrix CSV: bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("matrix CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("matrix CSV: no rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

/// Each matrix entry becomes a `cell` x `cell` block of pixels.
inline void write_matrix_pgm(std::ostream& os, const Matrix& m, std::size_t cell = 1) {
  if (cell == 0) throw InvalidInputError("PGM cell size must be >= 1");
  const double top = m.size() ? m.maxCoeff() : 0.0;
  const std::size_t width = static_cast<std::size_t>(m.cols()) * cell;
  const std::size_t height = static_cast<std::size_t>(m.rows()) * cell;
  os << "P5\n" << width << ' ' << height << "\n255\n";
  std::string row(width, '\0');
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = top > 0.0 ? std::clamp(m(i, j) / top, 0.0, 1.0) : 0.0;
      const auto px = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
      for (std::size_t k = 0; k < cell; ++k) row[static_cast<std::size_t>(j) * cell + k] = px;
    }
    for (std::size_t k = 0; k < cell; ++k) os.write(row.data(), static_cast<std::streamsize>(width));
  }
}

}  // namespace noisylab
