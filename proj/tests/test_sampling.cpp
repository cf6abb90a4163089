#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "rcm/sampling.hpp"
#include "test_support.hpp"

using namespace rcm;

TEST(SeededRng, EngineMatchesStandardReference) {
  // The C++ standard fixes the 10000th output of a default-seeded mt19937_64.
  SeededRng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ull);
  EXPECT_EQ(SeededRng::kAlgorithm, "mt19937_64");
}

TEST(SeededRng, SameSeedSameMillionDraws) {
  SeededRng a(77), b(77);
  for (int i = 0; i < 1000000; ++i) {
    ASSERT_EQ(a.uniform(), b.uniform());
  }
  SeededRng c(77), d(78);
  EXPECT_NE(c.next_u64(), d.next_u64());
}

TEST(SeededRng, UniformAndIntegerRanges) {
  SeededRng rng(1);
  std::array<int, 7> counts{};
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++counts[rng.uniform_int(7)];
  }
  for (int c : counts) EXPECT_NEAR(c / 70000.0, 1.0 / 7.0, 0.006);
  EXPECT_THROW(rng.uniform_int(0), InvalidArgument);
}

TEST(SeededRng, NormalMoments) {
  SeededRng rng(2);
  double m = 0, m2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m += z;
    m2 += z * z;
  }
  m /= n;
  EXPECT_NEAR(m, 0.0, 0.01);
  EXPECT_NEAR(m2 / n - m * m, 1.0, 0.015);
}

TEST(SeededRng, ChildStreamsAreFixedAndDistinct) {
  SeededRng root(10);
  auto a = root.child(0), b = root.child(1), a2 = root.child(0);
  EXPECT_EQ(a.seed(), splitmix64(10));
  EXPECT_EQ(b.seed(), splitmix64(11));
  EXPECT_NE(a.seed(), b.seed());
  EXPECT_EQ(a.next_u64(), a2.next_u64());
}

TEST(LogUniform, DegenerateIntervalAndSupport) {
  SeededRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = sample_log_uniform(rng, 1.0, 1.0 + 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-11);
  }
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_log_uniform(rng, 0.002, 80.0);
    ASSERT_GE(v, 0.002);
    ASSERT_LE(v, 80.0);
  }
  EXPECT_THROW(sample_log_uniform(rng, 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(sample_log_uniform(rng, 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(sample_log_uniform(rng, 1.0, 1.0), InvalidArgument);
}

TEST(LogUniform, MedianIsGeometricMean) {
  SeededRng rng(4);
  std::vector<double> v(100000);
  for (auto& x : v) x = sample_log_uniform(rng, 0.002, 80.0);
  EXPECT_NEAR(rcm::testing::median(v), 0.4, 0.02);
}

TEST(Bimodal, PLargeZeroIsLogUniform) {
  NoiseSchedule s;
  SamplerConfig cfg;
  cfg.p_large = 0.0;
  SeededRng rng(5);
  std::vector<double> v(100000);
  for (auto& x : v) x = sample_bimodal(rng, s, cfg);
  const double lo = std::log(0.002), hi = std::log(80.0);
  const double d = rcm::testing::ks_distance(v, [&](double x) { return (std::log(x) - lo) / (hi - lo); });
  EXPECT_LT(d, 0.01);
}

TEST(Bimodal, PLargeOneStaysInTopBand) {
  NoiseSchedule s;
  SamplerConfig cfg;
  cfg.p_large = 1.0;
  SeededRng rng(6);
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_bimodal(rng, s, cfg);
    ASSERT_GE(v, 76.0);
    ASSERT_LE(v, 80.0);
  }
}

TEST(Bimodal, DefaultHighNoiseFraction) {
  NoiseSchedule s;
  SamplerConfig cfg;
  SeededRng rng(7);
  int hits = 0;
  for (int i = 0; i < 100000; ++i) {
    const double v = sample_bimodal(rng, s, cfg);
    ASSERT_GE(v, s.sigma_min());
    ASSERT_LE(v, s.sigma_max());
    hits += v >= 76.0;
  }
  // Expected 0.95 + 0.05 * ln(80/76) / ln(80/0.002) = 0.950242; +-4 binomial sd = [0.94749, 0.95299].
  EXPECT_GE(hits / 1e5, 0.94749);
  EXPECT_LE(hits / 1e5, 0.95299);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.tau = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.p_large = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.k_max = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(IndexPair, ForcedPair) {
  SeededRng rng(8);
  for (int i = 0; i < 100; ++i) {
    auto p = sample_index_pair(rng, 2, 1);
    EXPECT_EQ(p.n_low, 0);
    EXPECT_EQ(p.n_high, 1);
  }
}

TEST(IndexPair, RejectsTooFewLevels) {
  SeededRng rng(9);
  EXPECT_THROW(sample_index_pair(rng, 5, 5), InvalidArgument);
  EXPECT_THROW(sample_index_pair(rng, 3, 0), InvalidArgument);
}

TEST(IndexPair, GapUniformAndHighIsNoisier) {
  NoiseSchedule s;
  SeededRng rng(10);
  std::array<int, 6> gaps{};
  for (int i = 0; i < 100000; ++i) {
    auto p = sample_index_pair(rng, 10, 5);
    const int k = p.n_high - p.n_low;
    ASSERT_GE(k, 1);
    ASSERT_LE(k, 5);
    ASSERT_GE(p.n_low, 0);
    ASSERT_LT(p.n_high, 10);
    ASSERT_GT(s.level_sigma(p.n_high), s.level_sigma(p.n_low));
    ++gaps[k];
  }
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(gaps[k] / 1e5, 0.2, 0.01) << k;
}
