#include <gtest/gtest.h>

#include <cmath>

#include "rcm/schedule.hpp"

using namespace rcm;

TEST(NoiseSchedule, DefaultsAndValidation) {
  NoiseSchedule s;
  EXPECT_EQ(s.sigma_min(), 0.002);
  EXPECT_EQ(s.sigma_max(), 80.0);
  EXPECT_EQ(s.sigma_data(), 0.5);
  EXPECT_EQ(s.n_levels(), 10);
  EXPECT_EQ(s.rho(), 7.0);
  EXPECT_EQ(s.epsilon(), s.sigma_min());
  EXPECT_THROW(NoiseSchedule(0.0, 80, 0.5, 10), InvalidArgument);
  EXPECT_THROW(NoiseSchedule(1.0, 1.0, 0.5, 10), InvalidArgument);
  EXPECT_THROW(NoiseSchedule(0.002, 80, 0.0, 10), InvalidArgument);
  EXPECT_THROW(NoiseSchedule(0.002, 80, 0.5, 1), InvalidArgument);
}

TEST(Precondition, BoundaryIsIdentity) {
  NoiseSchedule s;
  auto c = s.precondition(s.epsilon());
  EXPECT_EQ(c.c_skip, 1.0);
  EXPECT_EQ(c.c_out, 0.0);
}

TEST(Precondition, CinLimitAtZeroSigma) {
  // c_in(0) = 1/sqrt(sigma_data^2); sigma = 0 itself is outside the domain, so
  // use a schedule whose epsilon is tiny.
  NoiseSchedule s(1e-300, 80, 0.5, 10);
  EXPECT_DOUBLE_EQ(s.precondition(1e-300).c_in, 2.0);
}

TEST(Precondition, ValuesAtSigmaMax) {
  NoiseSchedule s;
  auto c = s.precondition(80.0);
  // Oracle: direct evaluation of the closed forms in double precision.
  EXPECT_NEAR(c.c_skip, 3.90629272263522e-05, 1e-17);
  EXPECT_NEAR(c.c_out, 0.49997773490522646, 1e-15);
  EXPECT_NEAR(c.c_in, 0.012499755866527323, 1e-16);
  EXPECT_NEAR(c.c_skip, 3.906e-5, 1e-8);
  EXPECT_NEAR(c.c_out, 0.49999, 5e-5);
  EXPECT_NEAR(c.c_in, 0.0125, 1e-6);
}

TEST(Precondition, RejectsOutOfRange) {
  NoiseSchedule s;
  EXPECT_THROW(s.precondition(0.001), InvalidArgument);
  EXPECT_THROW(s.precondition(80.5), InvalidArgument);
  EXPECT_NO_THROW(s.precondition(80.0));
}

TEST(Precondition, MonotoneOverRange) {
  NoiseSchedule s;
  Preconditioning prev = s.precondition(s.epsilon());
  const double lo = std::log(s.epsilon()), hi = std::log(s.sigma_max());
  for (int i = 1; i < 1000; ++i) {
    const double sigma = std::min(s.sigma_max(), std::exp(lo + (hi - lo) * i / 999.0));
    auto c = s.precondition(sigma);
    EXPECT_LT(c.c_skip, prev.c_skip) << sigma;
    EXPECT_GT(c.c_out, prev.c_out) << sigma;
    EXPECT_LT(c.c_in, prev.c_in) << sigma;
    prev = c;
  }
}

TEST(SigmaGrid, TwoLevelsAreEndpoints) {
  auto g = NoiseSchedule(0.002, 80, 0.5, 2).sigma_grid();
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], 80.0);
  EXPECT_EQ(g[1], 0.002);
}

TEST(SigmaGrid, PaperDefaultsMatchClosedForm) {
  NoiseSchedule s;
  auto g = s.sigma_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_NEAR(g[0], 80.0, 1e-12);
  EXPECT_NEAR(g[9], 0.002, 1e-12);
  // Oracle values from an independent evaluation of the rho = 7 interpolant.
  const double expected[10] = {80.0,
                               42.41518931851267,
                               21.10867673619376,
                               9.723201355260132,
                               4.066123602953759,
                               1.501741979068008,
                               0.46997905799774714,
                               0.1166385635251784,
                               0.020435334553438746,
                               0.002};
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(g[i], expected[i], 1e-12 * expected[i]) << i;
}

TEST(SigmaGrid, StrictlyDecreasingForManySizes) {
  for (int n = 2; n <= 64; ++n) {
    auto g = NoiseSchedule(0.002, 80, 0.5, n).sigma_grid();
    for (int i = 1; i < n; ++i) EXPECT_LT(g[i], g[i - 1]);
  }
}

TEST(SigmaGrid, LevelSigmaCountsUpward) {
  NoiseSchedule s;
  auto g = s.sigma_grid();
  for (int n = 0; n < 10; ++n) EXPECT_EQ(s.level_sigma(n), g[9 - n]);
  EXPECT_THROW(s.level_sigma(10), InvalidArgument);
  EXPECT_THROW(s.level_sigma(-1), InvalidArgument);
}

TEST(AddNoise, Examples) {
  auto x0 = Tensor::from({2}, {1, 2});
  auto e = Tensor::from({2}, {2, -2});
  auto y = add_noise(x0, 0.5, e);
  EXPECT_EQ(y.data()[0], 2.0);
  EXPECT_EQ(y.data()[1], 1.0);
  auto z = add_noise(x0, 0.0, e);
  EXPECT_EQ(z.data()[0], 1.0);
  auto p = add_noise(Tensor::zeros({2}), 80.0, e);
  EXPECT_EQ(p.data()[0], 160.0);
  EXPECT_EQ(p.data()[1], -160.0);
  EXPECT_THROW(add_noise(x0, 1.0, Tensor::zeros({3})), InvalidArgument);
}

TEST(AddNoise, PerSample) {
  auto x0 = Tensor::from({2, 2}, {1, 1, 1, 1});
  auto e = Tensor::full({2, 2}, 1.0);
  std::vector<double> sig{0.5, 3.0};
  auto y = add_noise(x0, sig, e);
  EXPECT_EQ(y.data()[1], 1.5);
  EXPECT_EQ(y.data()[2], 4.0);
}

TEST(SnrWeight, Examples) {
  NoiseSchedule s;
  EXPECT_DOUBLE_EQ(s.snr_weight(0.5), 0.5);
  EXPECT_NEAR(s.snr_weight(80.0), 3.9060974180696075e-05, 1e-18);
  EXPECT_NEAR(s.snr_weight(1e-9), 1.0, 1e-15);
  EXPECT_LT(s.snr_weight(1e9), 1e-18);
  EXPECT_THROW(s.snr_weight(0.0), InvalidArgument);
  EXPECT_THROW(s.snr_weight(-1.0), InvalidArgument);
}

TEST(SnrWeight, StrictlyDecreasing) {
  NoiseSchedule s;
  double prev = s.snr_weight(0.002);
  for (int i = 1; i < 1000; ++i) {
    const double w = s.snr_weight(0.002 * std::pow(40000.0, i / 999.0));
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(SigmaFromAlphabar, Examples) {
  EXPECT_EQ(sigma_from_alphabar(1.0), 0.0);
  EXPECT_DOUBLE_EQ(sigma_from_alphabar(0.5), 1.0);
  EXPECT_DOUBLE_EQ(sigma_from_alphabar(0.2), 2.0);
  EXPECT_THROW(sigma_from_alphabar(0.0), InvalidArgument);
  EXPECT_THROW(sigma_from_alphabar(1.5), InvalidArgument);
}
