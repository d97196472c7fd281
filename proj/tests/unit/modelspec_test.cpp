#include <gtest/gtest.h>

#include "support.hpp"

using namespace hieval;
namespace ts = testing_support;

TEST(Builtin, UseCase1FromConfigText) {
  const ModelSpec parsed = parse_model_config(R"(
name = use_case1
likelihood = binomial

level overall {
  factor = none
  mu = Normal(0, 1)
  sigma = HalfNormal(0.5)
}

# domains share the overall mean
level domain {
  factor = domain
  parent = overall
  sigma = HalfNormal(0.1)
}

predictor = domain
)");
  EXPECT_EQ(parsed, builtin_spec("use_case1"));
}

TEST(Builtin, UseCase2ChainsThreeLevels) {
  const ModelSpec s = builtin_spec("use_case2");
  ASSERT_EQ(s.levels.size(), 3u);
  EXPECT_EQ(s.levels[0].name, "model");
  EXPECT_EQ(s.levels[1].parent, std::optional<std::string>("model"));
  EXPECT_EQ(s.levels[2].parent, std::optional<std::string>("domain"));
  for (const auto& l : s.levels) EXPECT_EQ(l.sigma, PriorSpec::half_normal(0.1)) << l.name;
}

TEST(Builtin, BetaBinomialReasoningSlope) {
  const ModelSpec s = builtin_spec("reasoning_betabinomial");
  ASSERT_EQ(s.slopes.size(), 1u);
  EXPECT_EQ(s.slopes[0].indexed_by, (std::vector<std::string>{"model", "difficulty"}));
  EXPECT_EQ(s.slopes[0].covariate, "reasoning");
  EXPECT_EQ(s.likelihood.family, LikelihoodFamily::betabinomial_logit);
  ASSERT_TRUE(s.likelihood.dispersion_prior.has_value());
  EXPECT_EQ(*s.likelihood.dispersion_prior, PriorSpec::gamma(1.0, 0.1));
}

TEST(Builtin, NullModelHasNoSlope) {
  const ModelSpec s = builtin_spec("null_binomial");
  EXPECT_TRUE(s.slopes.empty());
  for (const char* level : {"model", "difficulty", "task"}) EXPECT_NE(s.find_level(level), nullptr) << level;
}

TEST(Builtin, UnknownNameListsChoices) {
  try {
    builtin_spec("use_case9");
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("use_case1"), std::string::npos);
  }
}

TEST(Config, SelfParentIsACycle) {
  EXPECT_THROW(parse_model_config(R"(
level a {
  factor = model
  parent = a
  mu = Normal(0, 1)
  sigma = HalfNormal(1)
}
predictor = a
)"),
               SpecError);
}

TEST(Config, BetaBinomialNeedsDispersion) {
  EXPECT_THROW(parse_model_config(R"(
likelihood = betabinomial
level a {
  factor = model
  mu = Normal(0, 1)
  sigma = HalfNormal(1)
}
predictor = a
)"),
               SpecError);
}

TEST(Config, RoundTripsEveryBuiltin) {
  for (const auto& name : builtin_names()) {
    const ModelSpec s = builtin_spec(name);
    EXPECT_EQ(parse_model_config(serialize_model_config(s)), s) << name;
  }
}

TEST(Config, JsonFormIsAccepted) {
  const ModelSpec s = parse_model_config(R"json({
    "name": "j",
    "levels": [{"name": "model", "factor": "model", "mu": "Normal(0, 1)", "sigma": "HalfNormal(0.5)"}],
    "predictor": ["model"]
  })json");
  ASSERT_EQ(s.levels.size(), 1u);
  EXPECT_EQ(s.levels[0].sigma, PriorSpec::half_normal(0.5));
}

TEST(Config, GammaScaleConventionConverts) {
  const PriorSpec rate = parse_prior("Gamma(2, 0.5)", GammaConvention::shape_rate);
  const PriorSpec scale = parse_prior("Gamma(2, 2)", GammaConvention::shape_scale);
  EXPECT_EQ(rate, scale);
}

TEST(Config, BadPriorText) {
  EXPECT_THROW(parse_prior("Normal(0)"), InputError);
  EXPECT_THROW(parse_prior("Cauchy(0, 1)"), InputError);
  EXPECT_THROW(parse_prior("HalfNormal(-1)"), InputError);
}

TEST(Validate, MissingFactorIsNamed) {
  const CellTable cells = ts::cells_from_csv("model,score\nA,1\nA,0\n", {"model"});
  const ValidationReport r = validate_spec(builtin_spec("use_case1"), cells);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.errors.front().find("factor domain absent"), std::string::npos) << r.errors.front();
}

TEST(Validate, MissingCovariate) {
  const CellTable cells =
      ts::cells_from_csv("model,task,difficulty,score\nA,t1,easy,1\nA,t2,hard,0\n", {"model", "difficulty", "task"});
  const ValidationReport r = validate_spec(builtin_spec("reasoning_binomial"), cells);
  EXPECT_FALSE(r.ok());
}

TEST(Validate, ValidPairingCountsLevels) {
  const CellTable cells = ts::cells_from_csv("model,domain,score\nA,d1,1\nA,d2,0\nA,d2,1\n", {"model", "domain"});
  const ValidationReport r = validate_spec(builtin_spec("use_case1"), cells);
  EXPECT_TRUE(r.ok());
  ASSERT_FALSE(r.level_counts.empty());
  bool found = false;
  for (const auto& [factor, n] : r.level_counts) {
    if (factor == "domain") {
      EXPECT_EQ(n, 2u);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Layout, UseCase1HasSixParameters) {
  const CellTable cells = ts::cells_from_csv("model,domain,score\nA,d1,1\nA,d2,0\n", {"model", "domain"});
  const ParameterLayout L = build_layout(builtin_spec("use_case1"), cells);
  EXPECT_EQ(L.total_dim, 6u);
  std::vector<std::string> names;
  for (const auto& e : L.entries) names.push_back(e.name + ":" + std::to_string(e.size));
  EXPECT_EQ(names, (std::vector<std::string>{"mu_overall:1", "sigma_overall:1", "z_overall:1", "sigma_domain:1",
                                             "z_domain:2"}));
}

TEST(Layout, UseCase2OnTwoByTwoByTwo) {
  std::string csv = "model,domain,subdomain,score\n";
  for (const char* m : {"A", "B"}) {
    for (const char* d : {"d1", "d2"}) {
      for (const char* s : {"s1", "s2"}) csv += std::string(m) + "," + d + "," + d + s + ",1\n";
    }
  }
  const CellTable cells = ts::cells_from_csv(csv, {"model", "domain", "subdomain"});
  const ParameterLayout L = build_layout(builtin_spec("use_case2"), cells);
  // mu_model, sigma and z for each of the three levels: 1 + (1+2) + (1+4) + (1+8)
  EXPECT_EQ(L.total_dim, 18u);
}

TEST(Layout, NullModelHasOneZPerTask) {
  std::string csv = "model,task,difficulty,score\n";
  for (int t = 0; t < 7; ++t) csv += "A,t" + std::to_string(t) + ",easy,1\n";
  const CellTable cells = ts::cells_from_csv(csv, {"model", "difficulty", "task"});
  const ParameterLayout L = build_layout(builtin_spec("null_binomial"), cells);
  const auto z = L.find_entry("z_task");
  ASSERT_TRUE(z.has_value());
  EXPECT_EQ(L.entries[*z].size, 7u);
}

TEST(Layout, SigmaEntriesUseLogTransform) {
  const CellTable cells = ts::cells_from_csv("model,domain,score\nA,d1,1\nA,d2,0\n", {"model", "domain"});
  const ParameterLayout L = build_layout(builtin_spec("use_case1"), cells);
  for (const auto& e : L.entries) {
    if (e.name.rfind("sigma_", 0) == 0) {
      EXPECT_EQ(e.transform, Transform::log) << e.name;
    }
    if (e.name.rfind("z_", 0) == 0) {
      EXPECT_EQ(e.transform, Transform::identity) << e.name;
    }
  }
}
