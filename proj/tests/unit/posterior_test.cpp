#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "hieval/posterior.hpp"

using namespace hieval;

namespace {

std::vector<double> draws_normal(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

std::vector<double> draws_exponential(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> d(1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

}  // namespace

TEST(Hpdi, EqualWidthWindowsTakeTheLowest) {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const Interval h = hpdi(x, 0.9);
  EXPECT_DOUBLE_EQ(h.low, 1.0);
  EXPECT_DOUBLE_EQ(h.high, 90.0);
  EXPECT_DOUBLE_EQ(h.width(), 89.0);
}

TEST(Hpdi, StandardNormal) {
  const Interval h = hpdi(draws_normal(200000, 1));
  EXPECT_NEAR(h.low, -1.96, 0.05);
  EXPECT_NEAR(h.high, 1.96, 0.05);
}

TEST(Hpdi, ExponentialStartsAtTheMode) {
  const auto x = draws_exponential(200000, 2);
  const Interval h = hpdi(x);
  EXPECT_NEAR(h.low, 0.0, 0.01);
  EXPECT_NEAR(h.high, -std::log(0.05), 0.08);
  const Interval ci = quantile_interval(x);
  EXPECT_GT(ci.low, 0.02);
  EXPECT_LT(h.width(), ci.width());
}

TEST(Hpdi, NeverWiderThanEqualTailed) {
  std::mt19937_64 rng(3);
  std::gamma_distribution<double> shape(0.5, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::gamma_distribution<double> g(shape(rng) + 0.2, 1.0);
    std::vector<double> x(1000 + 37 * trial);
    for (auto& v : x) v = g(rng);
    for (double mass : {0.5, 0.8, 0.95}) {
      EXPECT_LE(hpdi(x, mass).width(), quantile_interval(x, mass).width() + 1e-12) << trial << " " << mass;
    }
  }
}

TEST(Hpdi, BadInputs) {
  const auto x = draws_normal(100, 4);
  EXPECT_THROW(hpdi(x, 1.0), InputError);
  EXPECT_THROW(hpdi(x, 0.0), InputError);
  EXPECT_THROW(hpdi(std::vector<double>(5, 1.0)), InputError);
}

TEST(QuantileInterval, TwoPointInterpolation) {
  const std::vector<double> x = {0.0, 1.0};
  const Interval ci = quantile_interval(x, 0.5);
  EXPECT_DOUBLE_EQ(ci.low, 0.25);
  EXPECT_DOUBLE_EQ(ci.high, 0.75);
}

TEST(QuantileInterval, SymmetricSamplesMatchHpdi) {
  const auto x = draws_normal(200000, 5);
  const Interval ci = quantile_interval(x);
  const Interval h = hpdi(x);
  EXPECT_NEAR(ci.low, -1.96, 0.05);
  EXPECT_NEAR(ci.low, h.low, 0.03);
  EXPECT_NEAR(ci.high, h.high, 0.03);
}

TEST(Overlap, Geometry) {
  EXPECT_DOUBLE_EQ(overlap_fraction({0.44, 0.49}, {0.83, 0.85}), 0.0);
  EXPECT_DOUBLE_EQ(overlap_fraction({0.0, 1.0}, {0.25, 0.75}), 1.0);
  EXPECT_DOUBLE_EQ(overlap_fraction({0.0, 1.0}, {0.5, 1.5}), 0.5);
  EXPECT_DOUBLE_EQ(overlap_fraction({0.5, 1.5}, {0.0, 1.0}), 0.5);
  EXPECT_THROW(overlap_fraction({0.0, 1.0, 0.95}, {0.0, 1.0, 0.9}), InputError);
}

TEST(Overlap, ThreeWayRule) {
  EXPECT_EQ(decide(1.0).verdict, Verdict::equivalent);
  EXPECT_EQ(decide(0.995).verdict, Verdict::equivalent);
  EXPECT_EQ(decide(0.88).verdict, Verdict::inconclusive);
  EXPECT_EQ(decide(0.0).verdict, Verdict::different);
  EXPECT_EQ(compare_intervals({0.44, 0.49}, {0.83, 0.85}).verdict, Verdict::different);
  EXPECT_EQ(to_string(Verdict::inconclusive), "inconclusive");
}

TEST(ProbabilityScale, MapsIntoUnitInterval) {
  const std::vector<double> logits = {-30.0, -1.0, 0.0, 2.0, 30.0};
  const auto p = to_probability_scale(logits);
  EXPECT_DOUBLE_EQ(p[2], 0.5);
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_LE(p[i - 1], p[i]);
  const auto wide = to_probability_scale(draws_normal(5000, 6, 0.0, 8.0));
  const Interval h = hpdi(wide);
  EXPECT_GE(h.low, 0.0);
  EXPECT_LE(h.high, 1.0);
}

TEST(Exceedance, Basics) {
  const std::vector<double> above = {0.6, 0.7, 0.8};
  EXPECT_DOUBLE_EQ(threshold_exceedance(above, 0.5), 1.0);
  const std::vector<double> sym = {-2.0, -1.0, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(threshold_exceedance(sym, 0.0), 0.5);
  // P(X > 0.25) for X ~ Normal(0.249, 0.01) is Phi(-0.1) = 0.4602
  EXPECT_NEAR(threshold_exceedance(draws_normal(200000, 7, 0.249, 0.01), 0.25), 0.4602, 0.005);
}

TEST(Multimodal, FlagsTwoSeparatedModes) {
  auto x = draws_normal(5000, 8, -4.0);
  const auto y = draws_normal(5000, 9, 4.0);
  x.insert(x.end(), y.begin(), y.end());
  EXPECT_TRUE(hpdi_looks_multimodal(x));
  EXPECT_FALSE(hpdi_looks_multimodal(draws_normal(10000, 10)));
  EXPECT_FALSE(hpdi_looks_multimodal(draws_exponential(10000, 11)));
  EXPECT_FALSE(hpdi_looks_multimodal(draws_normal(500, 12)));
}
