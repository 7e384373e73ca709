#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "noisylab/noise.hpp"

using namespace noisylab;

namespace {

Matrix random_stochastic(Rng& rng, std::size_t c) {
  Matrix m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) = sample_simplex(rng, c);
  return m;
}

void expect_stochastic(const Matrix& m) {
  EXPECT_GE(m.minCoeff(), 0.0);
  for (Eigen::Index j = 0; j < m.cols(); ++j) EXPECT_NEAR(m.col(j).sum(), 1.0, 1e-9);
}

}  // namespace

TEST(NoiseMatrix, ValidatesInvariant) {
  EXPECT_NO_THROW(NoiseMatrix::identity(4));
  EXPECT_THROW(NoiseMatrix(Matrix::Zero(2, 3)), ShapeError);
  EXPECT_THROW(NoiseMatrix(Matrix::Constant(2, 2, 0.6)), InvalidInputError);
  Matrix neg(2, 2);
  neg << 1.5, 0, -0.5, 1;
  EXPECT_THROW(NoiseMatrix{neg}, InvalidInputError);
}

TEST(UniformPsi, Arithmetic) {
  const auto psi = build_uniform_psi(10, 0.3);
  EXPECT_NEAR(psi(0, 0), 0.73, 1e-15);
  EXPECT_NEAR(psi(3, 0), 0.03, 1e-15);
  EXPECT_NEAR(average_diagonal(psi), 0.73, 1e-15);
  EXPECT_EQ(build_uniform_psi(10, 0.0), NoiseMatrix::identity(10));
  const auto full = build_uniform_psi(10, 1.0);
  EXPECT_LT((full.matrix().array() - 0.1).abs().maxCoeff(), 1e-15);
  EXPECT_THROW(build_uniform_psi(10, 1.5), InvalidInputError);
  EXPECT_THROW(build_uniform_psi(1, 0.5), InvalidInputError);
}

TEST(NonUniformPsi, Properties) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_EQ(build_psi({NoiseFamily::nonuniform, 0.0, seed}, 10), NoiseMatrix::identity(10));
    const auto psi = build_psi({NoiseFamily::nonuniform, 0.5, seed}, 10);
    expect_stochastic(psi.matrix());
    for (Eigen::Index j = 0; j < 10; ++j) EXPECT_GE(psi.matrix()(j, j), 0.5);
    EXPECT_EQ(psi, build_psi({NoiseFamily::nonuniform, 0.5, seed}, 10));
  }
  EXPECT_FALSE(build_psi({NoiseFamily::nonuniform, 0.5, 1}, 10) ==
               build_psi({NoiseFamily::nonuniform, 0.5, 2}, 10));
}

TEST(CorruptLabels, IdentityLeavesLabelsAlone) {
  Rng rng(1);
  std::vector<Label> y{0, 1, 2, 3, 2, 1};
  EXPECT_EQ(corrupt_labels(y, NoiseMatrix::identity(4), rng), y);
  std::vector<Label> bad{5};
  EXPECT_THROW(corrupt_labels(bad, NoiseMatrix::identity(4), rng), InvalidInputError);
}

TEST(CorruptLabels, EmpiricalConfusionMatchesPsi) {
  Rng rng(2);
  const auto psi = build_uniform_psi(10, 0.5);
  std::vector<Label> y(60000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<Label>(i % 10);
  const auto noisy = corrupt_labels(y, psi, rng);
  Matrix counts = Matrix::Zero(10, 10);
  for (std::size_t i = 0; i < y.size(); ++i) counts(noisy[i], y[i]) += 1.0;
  counts /= 6000.0;
  EXPECT_LT((counts - psi.matrix()).cwiseAbs().maxCoeff(), 0.01);
}

TEST(CorruptLabels, FullNoiseKeepsAboutATenth) {
  Rng rng(3);
  std::vector<Label> y(100000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<Label>(i % 10);
  const auto noisy = corrupt_labels(y, build_uniform_psi(10, 1.0), rng);
  std::size_t same = 0;
  for (std::size_t i = 0; i < y.size(); ++i) same += noisy[i] == y[i];
  EXPECT_NEAR(same / 1e5, 0.1, 0.01);
}

TEST(NoiseHead, ZeroWeightsAndEmptyMaskGiveUniform) {
  Rng rng(4);
  const auto head = SoftmaxNoiseHead::zeros(5, 0.1);
  const Vector p = sample_simplex(rng, 5);
  EXPECT_LT((noise_head_forward(head, p, Vector::Ones(5)).array() - 0.2).abs().maxCoeff(), 1e-15);
  SoftmaxNoiseHead w{Matrix::Random(5, 5), 0.1};
  EXPECT_LT((noise_head_forward(w, p, Vector::Zero(5)).array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(NoiseHead, MatchesDirectComputation) {
  Rng rng(5);
  const NoiseMatrix psi(random_stochastic(rng, 4));
  SoftmaxNoiseHead head{8.0 * log_noise_weights(psi), 1.0};
  const Vector p = sample_simplex(rng, 4);
  const Vector g = noise_head_forward(head, p, Vector::Ones(4));
  for (int i = 0; i < 4; ++i) {
    double zi = 0.0;
    for (int j = 0; j < 4; ++j) zi += head.w(i, j) * p[j];
    double norm = 0.0;
    for (int k = 0; k < 4; ++k) {
      double zk = 0.0;
      for (int j = 0; j < 4; ++j) zk += head.w(k, j) * p[j];
      norm += std::exp(zk - zi);
    }
    EXPECT_NEAR(g[i], 1.0 / norm, 1e-12);
  }
}

TEST(NoiseHead, BackwardZeroUpstreamAndMaskedCoordinates) {
  Rng rng(6);
  SoftmaxNoiseHead head{Matrix::Random(6, 6), 0.5};
  const Vector p = sample_simplex(rng, 6);
  Vector mask = Vector::Ones(6);
  mask[2] = mask[4] = 0.0;
  const auto zero = noise_head_backward(head, p, mask, Vector::Zero(6));
  EXPECT_EQ(zero.dw.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(zero.dprobs.cwiseAbs().maxCoeff(), 0.0);
  Vector up(6);
  for (auto& v : up) v = rng.normal();
  const auto g = noise_head_backward(head, p, mask, up);
  EXPECT_EQ(g.dprobs[2], 0.0);
  EXPECT_EQ(g.dprobs[4], 0.0);
  EXPECT_EQ(g.dw.col(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(EquivalentNoise, ZeroWeightsAreUniform) {
  const auto m = extract_equivalent_noise(Matrix::Zero(10, 10));
  EXPECT_LT((m.matrix().array() - 0.1).abs().maxCoeff(), 1e-15);
  EXPECT_NEAR(average_diagonal(m), 0.1, 1e-15);
  EXPECT_EQ(average_diagonal(NoiseMatrix::identity(10)), 1.0);
}

TEST(EquivalentNoise, InvertsLogWithColumnShifts) {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const NoiseMatrix psi(random_stochastic(rng, 10));
    Matrix w = log_noise_weights(psi);
    for (Eigen::Index j = 0; j < 10; ++j) w.col(j).array() += 30.0 * rng.normal();
    const auto back = extract_equivalent_noise(w);
    EXPECT_LT((back.matrix() - psi.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  }
  Matrix w(10, 10);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 5.0 * rng.normal();
  expect_stochastic(extract_equivalent_noise(w).matrix());
}

TEST(FixedLinearHead, ReductionsAndClosure) {
  Rng rng(8);
  const Vector p = sample_simplex(rng, 5);
  EXPECT_LT((apply_fixed_linear_head(NoiseMatrix::identity(5), p) - p).norm(), 1e-15);
  const auto flat = build_uniform_psi(5, 1.0);
  EXPECT_LT((apply_fixed_linear_head(flat, p).array() - 0.2).abs().maxCoeff(), 1e-15);
  for (int t = 0; t < 20; ++t) {
    const NoiseMatrix psi(random_stochastic(rng, 5));
    EXPECT_NEAR(apply_fixed_linear_head(psi, sample_simplex(rng, 5)).sum(), 1.0, 1e-12);
  }
}

TEST(MatrixIo, CsvRoundTripIsExact) {
  Rng rng(9);
  const Matrix m = random_stochastic(rng, 10);
  std::stringstream ss;
  write_matrix_csv(ss, m);
  EXPECT_EQ(read_matrix_csv(ss), m);
  std::stringstream bad("1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(bad), FormatError);
  std::stringstream junk("1,x\n");
  EXPECT_THROW(read_matrix_csv(junk), FormatError);
}

TEST(MatrixIo, PgmHeaderAndScaling) {
  Matrix m(2, 2);
  m << 1.0, 0.5, 0.0, 0.25;
  std::stringstream ss;
  write_matrix_pgm(ss, m, 3);
  const std::string s = ss.str();
  const std::string header = "P5\n6 6\n255\n";
  ASSERT_EQ(s.substr(0, header.size()), header);
  ASSERT_EQ(s.size(), header.size() + 36);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size()]), 255);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 3]), 128);
  EXPECT_EQ(static_cast<unsigned char>(s[header.size() + 18]), 0);
}
