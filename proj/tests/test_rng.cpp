#include <gtest/gtest.h>

#include <algorithm>
#include <concepts>
#include <numeric>
#include <random>
#include <vector>

#include "noisylab/rng.hpp"

using noisylab::Rng;

static_assert(std::uniform_random_bit_generator<Rng>);

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, ForkedStreamsAreDistinctAndStable) {
  const Rng base(7);
  Rng f1 = base.fork(1), f1b = base.fork(1), f2 = base.fork(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x = f1.next_u64();
    EXPECT_EQ(x, f1b.next_u64());
    equal += x == f2.next_u64();
  }
  EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformMoments) {
  Rng rng(1);
  double sum = 0.0, lo = 1.0, hi = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_LT(lo, 0.001);
  EXPECT_GT(hi, 0.999);
  for (int i = 0; i < 1000; ++i) EXPECT_GT(rng.uniform_pos(), 0.0);
}

TEST(Rng, NormalAndExponentialMoments) {
  Rng rng(2);
  const int n = 200000;
  double s1 = 0, s2 = 0, e1 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    const double e = rng.exponential();
    ASSERT_GT(e, 0.0);
    e1 += e;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.015);
  EXPECT_NEAR(e1 / n, 1.0, 0.015);
}

TEST(Rng, BelowIsInRangeAndBalanced) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c / 70000.0, 1.0 / 7.0, 0.01);
  EXPECT_EQ(rng.below(0), 0u);
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(Rng, ShuffleIsADeterministicPermutation) {
  std::vector<int> a(100), b(100);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  Rng r1(5), r2(5);
  r1.shuffle(std::span<int>(a));
  r2.shuffle(std::span<int>(b));
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(a.begin(), a.end()));
}
