#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rsnn/rsnn.hpp"
#include "support/oracles.hpp"

using namespace rsnn;
namespace rt = rsnn::testing;

TEST(RateError, NearestCount) {
  EXPECT_EQ(rate_count(0.5, 8), 4);
  EXPECT_EQ(rate_error(0.5, 8), 0.0);
  EXPECT_EQ(rate_count(0.3, 8), 2);
  EXPECT_NEAR(rate_error(0.3, 8), 0.05, 1e-15);
  for (int T = 1; T <= 16; ++T) EXPECT_EQ(rate_error(1.0, T), 0.0);
}

TEST(RateError, TiesGoToLowerCount) {
  EXPECT_EQ(rate_count(0.25, 2), 0);  // halfway between 0 and 1/2
  EXPECT_EQ(rate_count(0.75, 2), 1);
  EXPECT_EQ(rate_count(1.0 / 16.0, 8), 0);
}

TEST(RateError, MatchesEnumerationOracle) {
  const auto xs = uniform_targets(5000, 3);
  for (int T : {1, 3, 8, 13})
    for (double x : xs) ASSERT_EQ(rate_count(x, T), rt::ref_rate_count(x, T));
}

TEST(RateErrors, RejectsTargetsOutsideUnitInterval) {
  const std::vector<double> bad{1.5};
  EXPECT_THROW(rate_errors(bad, 4), RangeError);
  const std::vector<double> ok{0.0, 1.0};
  EXPECT_EQ(rate_errors(ok, 4).size(), 2u);
}

TEST(RadixError, OnGridTargetHasNoError) {
  EXPECT_EQ(radix_error(0.375, 3, 0), 0.0);
  EXPECT_EQ(radix_error(0.375, 3, 4), 0.0);
}

TEST(RadixError, WorkedResidue) {
  // D = 11 at T' = 4 is x = 11/16; residue 3/4 over 2^T = 4.
  EXPECT_DOUBLE_EQ(radix_error(11.0 / 16.0, 2, 2), 0.1875);
}

TEST(RadixError, LayerModeUsesSimulatedResidues) {
  const RadixConfig cfg(2, 2);
  SnnLayer L{LayerSpec::dense(1, 1), {3}, {2}};
  const auto s = radix_errors(L, cfg, 50, 1);
  ASSERT_EQ(s.size(), 50u);
  for (const auto& e : s) {
    EXPECT_LT(e.radix_error, 0.25);
    EXPECT_GE(e.radix_error, 0.0);
  }
  SnnLayer never{LayerSpec::dense(1, 1), {0}, {-100}};
  EXPECT_THROW(radix_errors(never, cfg, 5, 1), ParameterError);
}

TEST(RadixError, UniformRmseMatchesClosedForm) {
  const auto s = radix_errors(UniformSampler{}, 8, 8, 100000, 5);
  const auto st = rmse(column(s, Encoding::radix));
  // residue numerator uniform on 0..255, scaled by 2^-16: rms = 2^-8 sqrt(E[(k/256)^2])
  const double closed = std::ldexp(1.0, -8) * std::sqrt((255.0 * 511.0) / (6.0 * 256.0 * 256.0));
  EXPECT_NEAR(st.rmse, closed, 0.01 * closed);
  EXPECT_NEAR(st.rmse, 2.25e-3, 0.05e-3);
  for (const auto& e : s) ASSERT_LT(e.radix_error, std::ldexp(1.0, -8));
}

TEST(RateError, UniformRmseMatchesQuantizerLaw) {
  for (int T : {4, 8, 12}) {
    const auto s = radix_errors(UniformSampler{}, T, 8, 100000, 6);
    const auto st = rmse(column(s, Encoding::rate));
    const double law = 1.0 / (2.0 * T * std::sqrt(3.0));
    EXPECT_NEAR(st.rmse, law, 0.05 * law) << "T=" << T;
    for (const auto& e : s) ASSERT_LE(e.rate_error, 1.0 / (2.0 * T) + 1e-15);
  }
}

TEST(Rmse, ConstantsAndExtrema) {
  const std::vector<double> c{0.3, 0.3, 0.3}, z{0.0}, r{0.05, 0.05};
  const auto a = rmse(c);
  EXPECT_NEAR(a.rmse, 0.3, 1e-15);
  EXPECT_EQ(a.max, 0.3);
  EXPECT_EQ(a.min, 0.3);
  EXPECT_EQ(rmse(z).rmse, 0.0);
  EXPECT_NEAR(rmse(r).rmse, 0.05, 1e-15);
  EXPECT_THROW(rmse(std::vector<double>{}), ParameterError);
}

TEST(CompareTable, DeterministicAndShaped) {
  const auto a = compare_table(2, 12, 8, 20000, 7);
  const auto b = compare_table(2, 12, 8, 20000, 7);
  EXPECT_EQ(format_compare_csv(a), format_compare_csv(b));
  ASSERT_EQ(a.size(), 11u);
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_LT(a[i].radix.rmse, a[i].rate.rmse);
    const double f = a[i].radix.rmse / a[i - 1].radix.rmse;
    EXPECT_GE(f, 0.45);
    EXPECT_LE(f, 0.55);
  }
  EXPECT_EQ(format_compare_csv(a).substr(0, 27), "T,radix_rmse,rate_rmse,rati");
  EXPECT_THROW(compare_table(5, 4, 0, 10, 0), ParameterError);
}
