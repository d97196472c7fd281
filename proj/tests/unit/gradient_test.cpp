#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace hieval;
namespace ts = testing_support;

namespace {

double fd_derivative(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

// d/dx of an expression built from one tape variable.
double ad_derivative(const std::function<ad::Var(const ad::Var&)>& f, double x) {
  ad::Tape tape;
  ad::Var v = tape.variable(x);
  ad::Var y = f(v);
  tape.propagate(y);
  return tape.adjoint(v);
}

CellTable single_cell(int k, int n) {
  CellTable t;
  t.factors.emplace_back("model");
  t.factors.back().add("m");
  t.cells.push_back({{0}, k, n, {}});
  return t;
}

ModelSpec flat_model() {
  return parse_model_config(R"(
name = flat
level model {
  factor = model
  mu = Normal(0, 1)
  sigma = none
}
predictor = model
)");
}

}  // namespace

TEST(Tape, ElementaryPartials) {
  const double x = 0.7;
  EXPECT_NEAR(ad_derivative([](const ad::Var& v) { return ad::exp(v) * v; }, x), std::exp(x) * (1 + x), 1e-14);
  EXPECT_NEAR(ad_derivative([](const ad::Var& v) { return ad::log(v) / v; }, x), (1 - std::log(x)) / (x * x), 1e-13);
  EXPECT_NEAR(ad_derivative([](const ad::Var& v) { return ad::inv_logit(v); }, x),
              math::inv_logit(x) * (1 - math::inv_logit(x)), 1e-15);
  EXPECT_NEAR(ad_derivative([](const ad::Var& v) { return ad::log1p_exp(v); }, x), math::inv_logit(x), 1e-15);
  EXPECT_NEAR(ad_derivative([](const ad::Var& v) { return v - v * v + (-v); }, x), -2 * x, 1e-15);
}

TEST(Tape, LogBetaPartialsMatchFiniteDifferences) {
  const double b = 2.3;
  auto f = [&](double a) { return math::log_beta(a, b); };
  const double ad_d = ad_derivative([&](const ad::Var& a) { return ad::log_beta(a, ad::Var(b)); }, 0.9);
  EXPECT_NEAR(ad_d, fd_derivative(f, 0.9), 1e-8);
}

TEST(Tape, ConstantsCarryNoAdjoint) {
  ad::Tape tape;
  ad::Var x = tape.variable(2.0);
  ad::Var c(5.0);
  ad::Var y = x * c + c;
  tape.propagate(y);
  EXPECT_DOUBLE_EQ(tape.adjoint(x), 5.0);
  EXPECT_DOUBLE_EQ(tape.adjoint(c), 0.0);
}

TEST(Gradient, PriorOnlyNormalIsMinusX) {
  ModelSpec spec = flat_model();
  CellTable cells = single_cell(1, 2);
  ParameterLayout L = build_layout(spec, cells);
  L.prior_only = true;
  ASSERT_EQ(L.total_dim, 1u);
  for (double x : {-1.3, 0.0, 0.4, 2.5}) {
    const std::vector<double> u = {x};
    const GradResult g = grad_log_posterior(L, u, cells);
    EXPECT_NEAR(g.gradient[0], -x, 1e-15);
  }
}

TEST(Gradient, SingleBinomialCellAtZero) {
  ModelSpec spec = flat_model();
  CellTable cells = single_cell(1, 2);
  ParameterLayout L = build_layout(spec, cells);
  const std::vector<double> u = {0.0};
  const GradResult g = grad_log_posterior(L, u, cells);
  // prior slope -x plus k - n p = 1 - 2 * 0.5
  EXPECT_NEAR(g.gradient[0], 0.0, 1e-15);
  const std::vector<double> u2 = {0.8};
  EXPECT_NEAR(grad_log_posterior(L, u2, cells).gradient[0], -0.8 + 1 - 2 * math::inv_logit(0.8), 1e-14);
}

TEST(Gradient, TapedValueEqualsPlainValue) {
  std::mt19937_64 rng(11);
  for (const auto& name : builtin_names()) {
    const ModelSpec spec = builtin_spec(name);
    const CellTable cells = ts::random_cells(spec, rng);
    const ParameterLayout L = build_layout(spec, cells);
    const auto u = ts::random_point(L.total_dim, rng);
    EXPECT_EQ(grad_log_posterior(L, u, cells).value, log_posterior(L, u, cells)) << name;
  }
}

TEST(Gradient, UseCase2MatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const ModelSpec spec = builtin_spec("use_case2");
  const CellTable cells = ts::random_cells(spec, rng);
  const ParameterLayout L = build_layout(spec, cells);
  for (int rep = 0; rep < 10; ++rep) {
    const auto u = ts::random_point(L.total_dim, rng);
    EXPECT_LT(finite_diff_check(L, u, cells), 1e-6);
  }
}

TEST(Gradient, BetaBinomialMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const ModelSpec spec = builtin_spec("reasoning_betabinomial");
  const CellTable cells = ts::random_cells(spec, rng);
  const ParameterLayout L = build_layout(spec, cells);
  for (int rep = 0; rep < 3; ++rep) {
    const auto u = ts::random_point(L.total_dim, rng);
    EXPECT_LT(finite_diff_check(L, u, cells), 1e-5);
  }
}

TEST(FiniteDiffCheck, QuadraticIsExact) {
  auto f = [](std::span<const double> x) { return -0.5 * (x[0] * x[0] + 3 * x[1] * x[1]) + x[0] * x[1]; };
  const std::vector<double> p = {0.4, -1.1};
  const std::vector<double> g = {-p[0] + p[1], -3 * p[1] + p[0]};
  EXPECT_LT(finite_diff_check(f, g, p, 1e-4), 1e-10);
}

TEST(FiniteDiffCheck, DetectsCorruptedGradient) {
  auto f = [](std::span<const double> x) { return -0.5 * x[0] * x[0] - 0.5 * x[1] * x[1]; };
  const std::vector<double> p = {0.3, 0.2};
  const std::vector<double> g = {-0.3 + 1.0, -0.2};
  EXPECT_NEAR(finite_diff_check(f, g, p, 1e-5), 1.0, 1e-6);
}

TEST(Gradient, NonFiniteInputIsReported) {
  const ModelSpec spec = builtin_spec("use_case1");
  std::mt19937_64 rng(1);
  const CellTable cells = ts::random_cells(spec, rng);
  const ParameterLayout L = build_layout(spec, cells);
  std::vector<double> u(L.total_dim, 0.0);
  u[1] = std::nan("");
  EXPECT_THROW(grad_log_posterior(L, u, cells), NumericError);
  GradResult r;
  EXPECT_FALSE(try_grad_log_posterior(L, u, cells, r));
}
