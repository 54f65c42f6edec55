#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <vector>

#include "wmlab/error.hpp"
#include "wmlab/randomness.hpp"
#include "wmlab/stats.hpp"

using namespace wmlab;

// Frozen from python hashlib.
TEST(PrfUniform, MatchesHashlibForIntegerKey) {
  const std::vector<std::uint32_t> ids{1, 2, 3};
  const auto ctx = encode_ids(ids);
  EXPECT_EQ(prf_seed(WatermarkKey::from_integer(5), ctx), 11335274265848809062ull);
  EXPECT_DOUBLE_EQ(prf_uniform(WatermarkKey::from_integer(5), ctx), 11335274265848809062ull * 0x1.0p-64);
}

TEST(PrfUniform, MatchesHashlibForStringKey) {
  const std::string c = "ctx";
  const std::vector<std::uint8_t> ctx(c.begin(), c.end());
  EXPECT_EQ(prf_seed(WatermarkKey::from_string("secret"), ctx), 10303528033830684236ull);
}

TEST(PrfUniform, RangeAndRawAgreement) {
  const auto key = WatermarkKey::from_integer(99);
  for (std::uint32_t i = 0; i < 2000; ++i) {
    const std::vector<std::uint32_t> ids{i};
    const auto ctx = encode_ids(ids);
    const double u = prf_uniform(key, ctx);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_EQ(prf_seed_raw(key.bytes(), ctx), prf_seed(key, ctx));
  }
}

TEST(PrfUniform, NullDrawsPassKs) {
  const auto key = WatermarkKey::from_integer(3);
  std::vector<double> u;
  for (std::uint32_t i = 0; i < 5000; ++i) {
    const std::vector<std::uint32_t> ids{i, i + 1};
    u.push_back(prf_uniform(key, encode_ids(ids)));
  }
  EXPECT_GT(ks_uniform(u).p_value, 0.01);
}

TEST(DeriveSeed, MatchesHashlib) { EXPECT_EQ(derive_seed(77, "generate", "a/0001"), 5509428377498916905ull); }

TEST(DeriveSeed, SeparatesStagesAndItems) {
  EXPECT_NE(derive_seed(1, "a", "b"), derive_seed(1, "ab", ""));
  EXPECT_NE(derive_seed(1, "x", "1"), derive_seed(2, "x", "1"));
}

TEST(Rng, ReproducibleStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    const auto k = c.below(13);
    ASSERT_LT(k, 13u);
  }
}

TEST(Rng, CategoricalFollowsWeights) {
  Rng r(5);
  const std::vector<double> w{1, 2, 3, 4};
  std::vector<std::size_t> counts(4, 0);
  for (int i = 0; i < 40000; ++i) counts[r.categorical(w)]++;
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  EXPECT_GT(chi_square_gof(counts, p).p_value, 0.001);
}

TEST(GammaCdf, MatchesBoost) {
  for (std::uint64_t k : {1, 2, 7, 40, 200, 1000}) {
    for (double x : {0.1, 1.0, 5.0, 38.5, 199.0, 1010.0}) {
      EXPECT_NEAR(gamma_cdf(k, x), boost::math::gamma_p(static_cast<double>(k), x), 1e-12) << k << " " << x;
    }
  }
}

TEST(GammaCdf, RejectsZeroShape) { EXPECT_THROW(gamma_cdf(0, 1.0), ValidationError); }

TEST(GammaCdf, MonotoneInX) {
  double prev = 0.0;
  for (double x = 0.0; x < 60.0; x += 0.25) {
    const double v = gamma_cdf(25, x);
    ASSERT_GE(v, prev);
    prev = v;
  }
}

TEST(Chi2, MatchesBoost) {
  for (double k : {1.0, 3.0, 9.0, 60.0}) {
    boost::math::chi_squared d(k);
    for (double x : {0.5, 3.0, 11.0, 70.0}) {
      EXPECT_NEAR(chi2_cdf(k, x), boost::math::cdf(d, x), 1e-12);
      EXPECT_NEAR(chi2_sf(k, x), boost::math::cdf(boost::math::complement(d, x)), 1e-12);
    }
  }
}

TEST(StdNormalCdf, MatchesBoost) {
  boost::math::normal n;
  for (double z : {-30.0, -5.0, -1.0, 0.0, 0.3, 2.5, 8.0}) {
    EXPECT_NEAR(std_normal_cdf(z), boost::math::cdf(n, z), 1e-15);
  }
}

TEST(IrwinHallCdf, SymmetricAndBounded) {
  for (std::uint64_t k : {1, 4, 30, 31, 80}) {
    EXPECT_EQ(irwin_hall_cdf(k, -1.0), 0.0);
    EXPECT_EQ(irwin_hall_cdf(k, static_cast<double>(k) + 1.0), 1.0);
    EXPECT_NEAR(irwin_hall_cdf(k, k / 2.0), 0.5, 1e-9);
    for (double t : {0.2, 0.37, 0.45}) {
      const double x = t * static_cast<double>(k);
      EXPECT_NEAR(irwin_hall_cdf(k, x) + irwin_hall_cdf(k, static_cast<double>(k) - x), 1.0, 1e-9);
    }
  }
}

TEST(IrwinHallCdf, SmallCasesClosedForm) {
  EXPECT_NEAR(irwin_hall_cdf(1, 0.3), 0.3, 1e-15);
  EXPECT_NEAR(irwin_hall_cdf(2, 0.5), 0.125, 1e-15);
  EXPECT_NEAR(irwin_hall_cdf(2, 1.5), 0.875, 1e-15);
  EXPECT_THROW(irwin_hall_cdf(0, 0.5), ValidationError);
}

TEST(IrwinHallCdf, ExactAndApproximateMeetSmoothly) {
  const double x = 0.42 * 30;
  EXPECT_NEAR(irwin_hall_cdf(30, x), irwin_hall_cdf(31, x * 31 / 30), 0.02);
}

// Statistic frozen from scipy.stats.kstest / chisquare.
TEST(KsUniform, StatisticMatchesScipy) {
  const std::vector<double> x{0.01, 0.2, 0.21, 0.35, 0.5, 0.52, 0.7, 0.9, 0.91, 0.99};
  const auto r = ks_uniform(x);
  EXPECT_NEAR(r.statistic, 0.2, 1e-12);
  EXPECT_NEAR(r.p_value, 0.7487, 0.05);
}

TEST(KsUniform, KolmogorovTailKnownQuantile) { EXPECT_NEAR(kolmogorov_sf(1.3581), 0.05, 1e-4); }

TEST(KsUniformGrid, UniformGridPasses) {
  std::vector<double> s;
  const std::size_t m = 9;
  for (int rep = 0; rep < 50; ++rep) {
    for (std::size_t i = 0; i <= m; ++i) s.push_back(static_cast<double>(i) / (m + 1));
  }
  EXPECT_NEAR(ks_uniform_grid(s, m).statistic, 0.0, 1e-12);
}

TEST(ChiSquareGof, MatchesScipy) {
  const std::vector<std::size_t> c{18, 22, 30, 30};
  const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
  const auto r = chi_square_gof(c, p);
  EXPECT_NEAR(r.statistic, 4.32, 1e-12);
  EXPECT_NEAR(r.p_value, 0.22891886433610517, 1e-10);
  EXPECT_EQ(r.df, 3u);
}
