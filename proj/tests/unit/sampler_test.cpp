#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace hieval;
namespace ts = testing_support;

namespace {

GradientFunction standard_normal() {
  return [](std::span<const double> x, double& lp, std::span<double> g) {
    lp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lp -= 0.5 * x[i] * x[i];
      g[i] = -x[i];
    }
    return true;
  };
}

GradientFunction flat() {
  return [](std::span<const double>, double& lp, std::span<double> g) {
    lp = 0.0;
    std::fill(g.begin(), g.end(), 0.0);
    return true;
  };
}

Target target(std::size_t dim, GradientFunction fn) { return {dim, std::move(fn)}; }

double mean_of(const Draws& d, std::size_t coord) {
  double s = 0.0;
  for (std::size_t c = 0; c < d.chains; ++c) {
    for (std::size_t i = 0; i < d.samples; ++i) s += d.at(c, i, coord);
  }
  return s / static_cast<double>(d.chains * d.samples);
}

double var_of(const Draws& d, std::size_t coord) {
  const double m = mean_of(d, coord);
  double s = 0.0;
  for (std::size_t c = 0; c < d.chains; ++c) {
    for (std::size_t i = 0; i < d.samples; ++i) s += (d.at(c, i, coord) - m) * (d.at(c, i, coord) - m);
  }
  return s / static_cast<double>(d.chains * d.samples - 1);
}

}  // namespace

TEST(Leapfrog, FreeParticleDrifts) {
  std::vector<double> q = {1.0, -2.0}, p = {0.5, 2.0};
  const std::vector<double> mass = {2.0, 4.0};
  ASSERT_TRUE(leapfrog(q, p, 0.1, mass, flat()));
  EXPECT_DOUBLE_EQ(q[0], 1.0 + 0.1 * 0.5 / 2.0);
  EXPECT_DOUBLE_EQ(q[1], -2.0 + 0.1 * 2.0 / 4.0);
  EXPECT_EQ(p, (std::vector<double>{0.5, 2.0}));
}

TEST(Leapfrog, Reversible) {
  const std::vector<double> mass = {1.0, 1.0, 1.0};
  const std::vector<double> q0 = {0.3, -1.2, 2.0}, p0 = {1.1, 0.4, -0.7};
  std::vector<double> q = q0, p = p0;
  for (int i = 0; i < 20; ++i) leapfrog(q, p, 0.05, mass, standard_normal());
  for (auto& v : p) v = -v;
  for (int i = 0; i < 20; ++i) leapfrog(q, p, 0.05, mass, standard_normal());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(q[i], q0[i], 1e-12);
    EXPECT_NEAR(-p[i], p0[i], 1e-12);
  }
}

TEST(Leapfrog, EnergyDriftIsBounded) {
  const std::vector<double> mass = {1.0};
  std::vector<double> q = {1.0}, p = {0.5};
  const double h0 = 0.5 * q[0] * q[0] + 0.5 * p[0] * p[0];
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    leapfrog(q, p, 0.1, mass, standard_normal());
    worst = std::max(worst, std::abs(0.5 * q[0] * q[0] + 0.5 * p[0] * p[0] - h0));
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Leapfrog, RejectsBadStep) {
  std::vector<double> q = {0.0}, p = {1.0};
  const std::vector<double> mass = {1.0};
  EXPECT_THROW(leapfrog(q, p, 0.0, mass, flat()), InputError);
}

TEST(Transition, FlatTargetAcceptsEverything) {
  PhasePoint z;
  z.q = {0.0, 0.0};
  std::mt19937_64 rng(1);
  const std::vector<double> mass = {1.0, 1.0};
  const TransitionStats st = nuts_transition(z, 1e-4, mass, flat(), rng, 3);
  EXPECT_NEAR(st.accept_stat, 1.0, 1e-12);
  EXPECT_FALSE(st.divergent);
}

TEST(Transition, NanGradientIsDivergentAndKeepsState) {
  GradientFunction poisoned = [](std::span<const double> x, double& lp, std::span<double> g) {
    if (std::abs(x[0]) > 1e-9) {
      lp = std::nan("");
      g[0] = std::nan("");
      return false;
    }
    lp = 0.0;
    g[0] = 0.0;
    return true;
  };
  PhasePoint z;
  z.q = {0.0};
  std::mt19937_64 rng(4);
  const std::vector<double> mass = {1.0};
  const TransitionStats st = nuts_transition(z, 0.5, mass, poisoned, rng);
  EXPECT_TRUE(st.divergent);
  EXPECT_EQ(z.q[0], 0.0);
}

TEST(Chains, StandardNormalMoments) {
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.samples = 2000;
  cfg.seed = 21;
  const Draws d = run_chains(target(1, standard_normal()), cfg);
  EXPECT_NEAR(mean_of(d, 0), 0.0, 0.05);
  EXPECT_NEAR(var_of(d, 0), 1.0, 0.1);
  EXPECT_EQ(divergence_count(d).total, 0u);
  EXPECT_LT(*split_rhat(d.parameter(0)), 1.01);
}

TEST(Chains, SameSeedIsBitIdentical) {
  const CellTable cells = ts::cells_from_csv("model,domain,score\nA,x,1\nA,x,0\nA,y,1\nA,y,1\n", {"model", "domain"});
  const ParameterLayout L = build_layout(builtin_spec("use_case1"), cells);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.warmup = 150;
  cfg.samples = 100;
  cfg.seed = 99;
  const Draws a = run_chains(L, cells, cfg);
  const Draws b = run_chains(L, cells, cfg);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(a.chain[c].values, b.chain[c].values);
    EXPECT_EQ(a.constrained[c], b.constrained[c]);
  }
  EXPECT_NE(a.chain[0].values, a.chain[1].values);
}

TEST(Chains, PriorOnlyNormalModel) {
  const ModelSpec spec = parse_model_config(R"(
level model {
  factor = model
  mu = Normal(0, 1)
  sigma = none
}
predictor = model
)");
  const CellTable cells = ts::cells_from_csv("model,score\nA,1\n", {"model"});
  ParameterLayout L = build_layout(spec, cells);
  L.prior_only = true;
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.samples = 2000;
  const Draws d = run_chains(L, cells, cfg);
  EXPECT_EQ(divergence_count(d).total, 0u);
  EXPECT_LT(*split_rhat(d.parameter(0)), 1.01);
  const auto rows = summary_table(d, L);
  ASSERT_FALSE(rows.empty());
  EXPECT_NEAR(rows[0].mean, 0.0, 0.05);
  EXPECT_NEAR(rows[0].sd, 1.0, 0.05);
}

TEST(Chains, UseCase1RecoversProportions) {
  std::vector<EvalRecord> recs;
  ts::add_trials(recs, "llm", "d1", 591, 1257);
  ts::add_trials(recs, "llm", "d2", 5685, 6768);
  const CellTable cells = canonicalize(aggregate_cells(recs, {"model", "domain"}));
  const ParameterLayout L = build_layout(builtin_spec("use_case1"), cells);
  SamplerConfig cfg;
  cfg.warmup = 1000;
  cfg.samples = 1000;
  cfg.target_accept = 0.99;
  const Draws d = run_chains(L, cells, cfg);
  const auto rows = summary_table(d, L);
  auto mean_of_row = [&](const std::string& name) {
    for (const auto& r : rows) {
      if (r.parameter == name) return r.mean;
    }
    ADD_FAILURE() << "no row " << name;
    return 0.0;
  };
  EXPECT_NEAR(mean_of_row("domain_p[d1]"), 0.47, 0.03);
  EXPECT_NEAR(mean_of_row("domain_p[d2]"), 0.84, 0.03);
}

TEST(Chains, ThreadCapKeepsResults) {
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.warmup = 200;
  cfg.samples = 50;
  const Draws a = run_chains(target(2, standard_normal()), cfg);
  ::setenv("HIEVAL_THREADS", "1", 1);
  const Draws b = run_chains(target(2, standard_normal()), cfg);
  ::unsetenv("HIEVAL_THREADS");
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(a.chain[c].values, b.chain[c].values);
}

TEST(Config, Validation) {
  SamplerConfig cfg;
  cfg.target_accept = 1.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.warmup = 10;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.chains = 0;
  EXPECT_THROW(cfg.validate(), InputError);
}
