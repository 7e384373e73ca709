#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "noisylab/math.hpp"
#include "oracles.hpp"

using namespace noisylab;

namespace {
Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST(Softmax, SymmetricPair) {
  const Vector s = softmax(vec({0, 0}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Softmax, AnalyticValue) {
  const Vector s = softmax(vec({0, std::log(3.0)}));
  EXPECT_NEAR(s[0], 0.25, 1e-15);
  EXPECT_NEAR(s[1], 0.75, 1e-15);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  const Vector s = softmax(vec({1000, 1000}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Softmax, ShiftInvarianceAndNormalization) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    Vector v(7);
    for (auto& x : v) x = 20.0 * rng.normal();
    const double c = 50.0 * rng.normal();
    const Vector a = softmax(v);
    const Vector b = softmax((v.array() + c).matrix());
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(a.sum(), 1.0, 1e-12);
    EXPECT_EQ(argmax(a), argmax(v));
  }
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(softmax(Vector()), InvalidInputError);
  EXPECT_THROW(softmax(vec({1.0, NAN})), InvalidInputError);
}

TEST(Softmax, RowsMatchVectorVersion) {
  Rng rng(4);
  Matrix m(5, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  const Matrix s = softmax_rows(m);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    EXPECT_LT((s.row(r).transpose() - softmax(m.row(r).transpose())).norm(), 1e-15);
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(vec({0.1, 3.0, -1})), 1u);
  EXPECT_EQ(argmax(vec({2, 2})), 0u);
}

TEST(SampleSimplex, DegenerateDimension) {
  Rng rng(1);
  const Vector s = sample_simplex(rng, 1);
  EXPECT_EQ(s.size(), 1);
  EXPECT_DOUBLE_EQ(s[0], 1.0);
  EXPECT_THROW(sample_simplex(rng, 0), InvalidInputError);
}

TEST(SampleSimplex, DrawsLieOnSimplexWithUniformMeans) {
  Rng rng(2);
  Vector mean = Vector::Zero(10);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector s = sample_simplex(rng, 10);
    ASSERT_GE(s.minCoeff(), 0.0);
    ASSERT_NEAR(s.sum(), 1.0, 1e-12);
    mean += s;
  }
  mean /= n;
  for (Eigen::Index k = 0; k < 10; ++k) EXPECT_NEAR(mean[k], 0.1, 0.01);
}

TEST(BernoulliMask, ExtremesAndMean) {
  Rng rng(5);
  EXPECT_EQ(bernoulli_mask(rng, 50, 1.0).sum(), 50.0);
  EXPECT_EQ(bernoulli_mask(rng, 50, 0.0).sum(), 0.0);
  double total = 0.0;
  for (int i = 0; i < 1000; ++i) total += bernoulli_mask(rng, 1000, 0.1).sum();
  EXPECT_NEAR(total / 1e6, 0.1, 0.001);
  EXPECT_THROW(bernoulli_mask(rng, 3, 1.5), InvalidInputError);
}

TEST(SampleCategorical, PointMassesAndFrequencies) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_categorical(rng, vec({1, 0, 0})), 0u);
    EXPECT_EQ(sample_categorical(rng, vec({0, 0, 1})), 2u);
  }
  std::vector<int> counts(10, 0);
  const Vector uniform = Vector::Constant(10, 0.1);
  for (int i = 0; i < 100000; ++i) ++counts[sample_categorical(rng, uniform)];
  for (int c : counts) EXPECT_NEAR(c / 1e5, 0.1, 0.01);
  EXPECT_THROW(sample_categorical(rng, vec({0.5, 0.4})), InvalidInputError);
  EXPECT_THROW(sample_categorical(rng, vec({1.5, -0.5})), InvalidInputError);
}

TEST(SimplexProjection, FixedPointAndKnownValue) {
  const Vector on = vec({0.2, 0.3, 0.5});
  EXPECT_LT((project_to_simplex(on) - on).norm(), 1e-15);
  const Vector p = project_to_simplex(vec({0.5, 0.9, -0.2}));
  EXPECT_NEAR(p[0], 0.3, 1e-12);
  EXPECT_NEAR(p[1], 0.7, 1e-12);
  EXPECT_NEAR(p[2], 0.0, 1e-12);
  const Vector q = project_to_simplex(Vector::Constant(4, 7.0));
  for (double x : q) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(SimplexProjection, MatchesBruteForceOracle) {
  Rng rng(8);
  for (int t = 0; t < 300; ++t) {
    Vector v(8);
    for (auto& x : v) x = rng.normal();
    const Vector fast = project_to_simplex(v);
    const Vector slow = oracle::brute_force_simplex_projection(v);
    EXPECT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(SimplexProjection, ColumnsIdempotentAndSquareOnly) {
  Rng rng(9);
  Matrix m(6, 6);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  const Matrix p = project_columns_to_simplex(m);
  EXPECT_LT((project_columns_to_simplex(p) - p).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-12);
  EXPECT_THROW(project_columns_to_simplex(Matrix::Zero(2, 3)), ShapeError);
}
