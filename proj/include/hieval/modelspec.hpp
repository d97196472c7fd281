#pragma once

// Declarative hierarchical GLM descriptions.
//
// A model is a list of levels (group effects, optionally nested under a
// parent level), a list of covariate slopes, a likelihood family and the
// set of terms summed into the logit-scale linear predictor.
//
// Level semantics, for group g with parent group pg:
//   mean(g)   = parent_effect[pg] + mu[pg], mu[pg] ~ Normal(loc, sd), when mu
//               is a prior (one mu per parent group; parent_effect is 0 at a root),
//             = parent_effect[pg] + value for `inherit` (value 0) / `fixed`
//   effect(g) = mean(g) + sigma * z[g],  z[g] ~ Normal(0, 1)   (non-centered)
//   effect(g) ~ Normal(mean(g), sigma)                         (centered)
// A level without a sigma prior is unpooled: effect(g) = mu directly.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieval/csv.hpp"
#include "hieval/dataset.hpp"
#include "hieval/error.hpp"

namespace hieval {

struct PriorSpec {
  enum class Family { normal, half_normal, gamma };

  Family family = Family::normal;
  double a = 0.0;  // Normal: mean; HalfNormal: scale; Gamma: shape
  double b = 1.0;  // Normal: sd;   HalfNormal: unused; Gamma: rate

  static PriorSpec normal(double mean, double sd) { return {Family::normal, mean, sd}; }
  static PriorSpec half_normal(double scale) { return {Family::half_normal, scale, 0.0}; }
  static PriorSpec gamma(double shape, double rate) { return {Family::gamma, shape, rate}; }

  bool positive_support() const { return family != Family::normal; }

  std::string to_string() const {
    switch (family) {
      case Family::normal: return "Normal(" + csv::format_double(a) + ", " + csv::format_double(b) + ")";
      case Family::half_normal: return "HalfNormal(" + csv::format_double(a) + ")";
      case Family::gamma: return "Gamma(" + csv::format_double(a) + ", " + csv::format_double(b) + ")";
    }
    return {};
  }

  bool operator==(const PriorSpec&) const = default;
};

struct MeanSpec {
  enum class Kind { prior, inherit, fixed };

  Kind kind = Kind::prior;
  PriorSpec prior = PriorSpec::normal(0.0, 1.0);
  double value = 0.0;

  static MeanSpec from_prior(PriorSpec p) { return {Kind::prior, p, 0.0}; }
  static MeanSpec inherit() { return {Kind::inherit, PriorSpec::normal(0.0, 1.0), 0.0}; }
  static MeanSpec fixed(double v) { return {Kind::fixed, PriorSpec::normal(0.0, 1.0), v}; }

  std::string to_string() const {
    switch (kind) {
      case Kind::prior: return prior.to_string();
      case Kind::inherit: return "inherit";
      case Kind::fixed: return "fixed(" + csv::format_double(value) + ")";
    }
    return {};
  }

  bool operator==(const MeanSpec& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::prior) return prior == o.prior;
    if (kind == Kind::fixed) return value == o.value;
    return true;
  }
};

struct LevelSpec {
  std::string name;
  std::optional<std::string> factor;  // nullopt: a single scalar group
  std::optional<std::string> parent;
  MeanSpec mu;
  std::optional<PriorSpec> sigma;  // nullopt: unpooled effects
  bool noncentered = true;

  bool operator==(const LevelSpec&) const = default;
};

struct SlopeSpec {
  std::string name;
  std::string covariate;
  std::vector<std::string> indexed_by;
  PriorSpec mu_prior = PriorSpec::normal(0.0, 1.0);
  PriorSpec sigma_prior = PriorSpec::half_normal(0.1);
  bool noncentered = true;

  bool operator==(const SlopeSpec&) const = default;
};

enum class LikelihoodFamily { binomial_logit, betabinomial_logit };

inline std::string_view to_string(LikelihoodFamily f) {
  return f == LikelihoodFamily::binomial_logit ? "binomial" : "betabinomial";
}

struct LikelihoodSpec {
  LikelihoodFamily family = LikelihoodFamily::binomial_logit;
  std::optional<PriorSpec> dispersion_prior;

  bool operator==(const LikelihoodSpec&) const = default;
};

struct ModelSpec {
  std::string name;
  LikelihoodSpec likelihood;
  std::vector<LevelSpec> levels;
  std::vector<SlopeSpec> slopes;
  std::vector<std::string> predictor_terms;

  const LevelSpec* find_level(std::string_view n) const {
    for (const auto& l : levels) {
      if (l.name == n) return &l;
    }
    return nullptr;
  }
  const SlopeSpec* find_slope(std::string_view n) const {
    for (const auto& s : slopes) {
      if (s.name == n) return &s;
    }
    return nullptr;
  }

  /// Factors referenced by levels and slopes, in declaration order.
  std::vector<std::string> factors() const {
    std::vector<std::string> out;
    auto add = [&](const std::string& f) {
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    };
    for (const auto& l : levels) {
      if (l.factor) add(*l.factor);
    }
    for (const auto& s : slopes) {
      for (const auto& f : s.indexed_by) add(f);
    }
    return out;
  }

  std::vector<std::string> covariates() const {
    std::vector<std::string> out;
    for (const auto& s : slopes) {
      if (std::find(out.begin(), out.end(), s.covariate) == out.end()) out.push_back(s.covariate);
    }
    return out;
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Throws SpecError if the spec violates a structural invariant.
inline void check_spec(const ModelSpec& spec) {
  std::set<std::string> names;
  auto fail = [&](const std::string& msg) { throw SpecError("model '" + spec.name + "': " + msg); };
  for (std::size_t i = 0; i < spec.levels.size(); ++i) {
    const LevelSpec& l = spec.levels[i];
    if (l.name.empty()) fail("level with empty name");
    if (!names.insert(l.name).second) fail("duplicate name '" + l.name + "'");
    if (l.parent) {
      if (*l.parent == l.name) fail("cycle: level '" + l.name + "' is its own parent");
      bool earlier = false;
      for (std::size_t j = 0; j < i; ++j) earlier |= spec.levels[j].name == *l.parent;
      if (!earlier) {
        bool later = false;
        for (std::size_t j = i + 1; j < spec.levels.size(); ++j) later |= spec.levels[j].name == *l.parent;
        if (later) fail("cycle or forward reference: parent '" + *l.parent + "' of '" + l.name +
                        "' must be declared earlier");
        fail("unknown parent '" + *l.parent + "' of level '" + l.name + "'");
      }
    }
    if (l.mu.kind == MeanSpec::Kind::prior && l.mu.prior.family != PriorSpec::Family::normal) {
      fail("mean prior of level '" + l.name + "' must be Normal");
    }
    if (l.mu.kind == MeanSpec::Kind::prior && !(l.mu.prior.b > 0.0)) fail("non-positive sd in '" + l.name + "'");
    if (l.mu.kind == MeanSpec::Kind::inherit && !l.parent) fail("level '" + l.name + "' inherits but has no parent");
    if (l.sigma) {
      if (!l.sigma->positive_support()) fail("sigma prior of level '" + l.name + "' must be HalfNormal or Gamma");
    } else if (l.mu.kind != MeanSpec::Kind::prior) {
      fail("level '" + l.name + "' has neither a sigma prior nor a mean prior");
    }
  }
  for (const SlopeSpec& s : spec.slopes) {
    if (s.name.empty()) fail("slope with empty name");
    if (!names.insert(s.name).second) fail("duplicate name '" + s.name + "'");
    if (s.covariate.empty()) fail("slope '" + s.name + "' has no covariate");
    if (s.mu_prior.family != PriorSpec::Family::normal) fail("mean prior of slope '" + s.name + "' must be Normal");
    if (!s.sigma_prior.positive_support()) fail("sigma prior of slope '" + s.name + "' must be HalfNormal or Gamma");
  }
  auto check_prior = [&](const PriorSpec& p) {
    const bool ok = p.family == PriorSpec::Family::normal ? p.b > 0.0
                    : p.family == PriorSpec::Family::half_normal ? p.a > 0.0
                                                                 : (p.a > 0.0 && p.b > 0.0);
    if (!ok) fail("prior " + p.to_string() + " needs strictly positive scale/shape/rate");
  };
  for (const auto& l : spec.levels) {
    if (l.mu.kind == MeanSpec::Kind::prior) check_prior(l.mu.prior);
    if (l.sigma) check_prior(*l.sigma);
  }
  for (const auto& s : spec.slopes) {
    check_prior(s.mu_prior);
    check_prior(s.sigma_prior);
  }
  if (spec.likelihood.family == LikelihoodFamily::betabinomial_logit) {
    if (!spec.likelihood.dispersion_prior) fail("betabinomial likelihood requires a dispersion prior");
    if (!spec.likelihood.dispersion_prior->positive_support()) fail("dispersion prior must be HalfNormal or Gamma");
    check_prior(*spec.likelihood.dispersion_prior);
  } else if (spec.likelihood.dispersion_prior) {
    fail("dispersion prior is only valid for the betabinomial likelihood");
  }
  if (spec.predictor_terms.empty()) fail("empty predictor");
  bool has_level = false;
  std::set<std::string> seen;
  for (const auto& t : spec.predictor_terms) {
    if (!seen.insert(t).second) fail("predictor term '" + t + "' repeated");
    if (spec.find_level(t)) {
      has_level = true;
    } else if (!spec.find_slope(t)) {
      fail("predictor term '" + t + "' is not a declared level or slope");
    }
  }
  if (!has_level) fail("at least one level must contribute to the predictor");
}

// ---------------------------------------------------------------------------
// Builtin models

inline ModelSpec builtin_spec(std::string_view name) {
  using P = PriorSpec;
  ModelSpec s;
  s.name = std::string(name);
  if (name == "use_case1") {
    s.levels = {
        {"overall", std::nullopt, std::nullopt, MeanSpec::from_prior(P::normal(0, 1)), P::half_normal(0.5), true},
        {"domain", "domain", "overall", MeanSpec::inherit(), P::half_normal(0.1), true},
    };
    s.predictor_terms = {"domain"};
  } else if (name == "use_case2") {
    s.levels = {
        {"model", "model", std::nullopt, MeanSpec::from_prior(P::normal(0, 1)), P::half_normal(0.1), true},
        {"domain", "domain", "model", MeanSpec::inherit(), P::half_normal(0.1), true},
        {"subdomain", "subdomain", "domain", MeanSpec::inherit(), P::half_normal(0.1), true},
    };
    s.predictor_terms = {"subdomain"};
  } else if (name == "reasoning_binomial" || name == "reasoning_betabinomial" || name == "null_binomial") {
    const bool null_model = name == "null_binomial";
    s.levels = {
        {"overall", std::nullopt, std::nullopt, MeanSpec::from_prior(P::normal(0, 1)), P::half_normal(1.0), true},
        {"model", "model", "overall", MeanSpec::from_prior(P::normal(0, 1)),
         P::half_normal(null_model ? 1.0 : 0.5), true},
        {"difficulty", "difficulty", std::nullopt, MeanSpec::from_prior(P::normal(0, 1)), P::half_normal(0.1), true},
        {"task", "task", std::nullopt, MeanSpec::fixed(0.0), P::half_normal(0.5), true},
    };
    if (null_model) {
      s.predictor_terms = {"model", "difficulty", "task"};
    } else {
      s.slopes = {{"reasoning", "reasoning", {"model", "difficulty"}, P::normal(0, 1), P::half_normal(0.1), true}};
      s.predictor_terms = {"model", "difficulty", "reasoning", "task"};
    }
    if (name == "reasoning_betabinomial") {
      s.likelihood = {LikelihoodFamily::betabinomial_logit, P::gamma(1.0, 0.1)};
    }
  } else {
    throw InputError("unknown builtin model '" + std::string(name) +
                     "' (expected use_case1, use_case2, reasoning_binomial, reasoning_betabinomial, null_binomial)");
  }
  check_spec(s);
  return s;
}

inline std::vector<std::string> builtin_names() {
  return {"use_case1", "use_case2", "reasoning_binomial", "reasoning_betabinomial", "null_binomial"};
}

// ---------------------------------------------------------------------------
// Config text

enum class GammaConvention { shape_rate, shape_scale };

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline std::vector<double> parse_args(std::string_view text, std::string_view what) {
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw InputError("malformed prior '" + std::string(what) + "'");
  }
  std::vector<double> out;
  std::string inner(text.substr(open + 1, close - open - 1));
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto v = csv::parse_double(tok);
    if (!v) throw InputError("non-numeric argument in '" + std::string(what) + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

/// Parses `Normal(mu, sd)`, `HalfNormal(sd)` or `Gamma(shape, rate|scale)`.
inline PriorSpec parse_prior(std::string_view text, GammaConvention gamma = GammaConvention::shape_rate) {
  const std::string t = csv::trim(text);
  const std::string head = detail::lower(t.substr(0, t.find('(')));
  const auto args = detail::parse_args(t, t);
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw InputError("prior '" + t + "' expects " + std::to_string(n) + " argument(s)");
  };
  auto positive = [&](double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("prior '" + t + "' needs positive, finite scale parameters");
    return v;
  };
  if (head == "normal") {
    need(2);
    if (!std::isfinite(args[0])) throw InputError("prior '" + t + "' has a non-finite mean");
    return PriorSpec::normal(args[0], positive(args[1]));
  }
  if (head == "halfnormal" || head == "half_normal") {
    if (args.size() == 2 && args[0] == 0.0) return PriorSpec::half_normal(positive(args[1]));
    need(1);
    return PriorSpec::half_normal(positive(args[0]));
  }
  if (head == "gamma") {
    need(2);
    positive(args[0]);
    positive(args[1]);
    return PriorSpec::gamma(args[0], gamma == GammaConvention::shape_rate ? args[1] : 1.0 / args[1]);
  }
  throw InputError("unknown prior family '" + t + "'");
}

inline MeanSpec parse_mean(std::string_view text, GammaConvention gamma = GammaConvention::shape_rate) {
  const std::string t = csv::trim(text);
  const std::string low = detail::lower(t);
  if (low == "inherit") return MeanSpec::inherit();
  if (low.rfind("fixed", 0) == 0) {
    const auto args = detail::parse_args(t, t);
    if (args.size() != 1) throw InputError("fixed(...) expects one value");
    return MeanSpec::fixed(args[0]);
  }
  if (const auto v = csv::parse_double(t)) return MeanSpec::fixed(*v);
  return MeanSpec::from_prior(parse_prior(t, gamma));
}

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& where) {
  const std::string l = lower(csv::trim(v));
  if (l == "true" || l == "yes" || l == "1") return true;
  if (l == "false" || l == "no" || l == "0") return false;
  throw InputError("expected true/false for " + where);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == '+') {
      if (!csv::trim(cur).empty()) out.push_back(csv::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!csv::trim(cur).empty()) out.push_back(csv::trim(cur));
  return out;
}

inline LikelihoodFamily parse_likelihood(const std::string& v) {
  const std::string l = lower(csv::trim(v));
  if (l == "binomial" || l == "binomial-logit") return LikelihoodFamily::binomial_logit;
  if (l == "betabinomial" || l == "beta-binomial" || l == "betabinomial-logit") {
    return LikelihoodFamily::betabinomial_logit;
  }
  throw InputError("unknown likelihood family '" + v + "'");
}

struct RawBlock {
  std::string kind;  // level | slope
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line = 0;
};

inline ModelSpec parse_model_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> top;
  std::vector<RawBlock> blocks;
  std::optional<RawBlock> open;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string t = csv::trim(line);
    if (t.empty()) continue;
    const std::string where = " at line " + std::to_string(line_no);
    if (t == "}") {
      if (!open) throw InputError("unmatched '}'" + where);
      blocks.push_back(std::move(*open));
      open.reset();
      continue;
    }
    if (t.back() == '{') {
      if (open) throw InputError("nested blocks are not allowed" + where);
      std::istringstream hs(t.substr(0, t.size() - 1));
      RawBlock b;
      hs >> b.kind >> b.name;
      b.kind = lower(b.kind);
      if ((b.kind != "level" && b.kind != "slope") || b.name.empty()) {
        throw InputError("expected 'level <name> {' or 'slope <name> {'" + where);
      }
      b.line = line_no;
      open = std::move(b);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError("expected 'key = value'" + where);
    std::string key = lower(csv::trim(t.substr(0, eq)));
    std::string value = csv::trim(t.substr(eq + 1));
    if (open) {
      open->entries.emplace_back(std::move(key), std::move(value));
    } else {
      top.emplace_back(std::move(key), std::move(value));
    }
  }
  if (open) throw InputError("unterminated block '" + open->name + "'");

  GammaConvention gamma = GammaConvention::shape_rate;
  for (const auto& [k, v] : top) {
    if (k == "gamma") {
      const std::string l = lower(v);
      if (l == "rate" || l == "shape_rate") {
        gamma = GammaConvention::shape_rate;
      } else if (l == "scale" || l == "shape_scale") {
        gamma = GammaConvention::shape_scale;
      } else {
        throw InputError("gamma must be 'rate' or 'scale'");
      }
    }
  }

  ModelSpec spec;
  std::optional<std::string> dispersion;
  for (const auto& [k, v] : top) {
    if (k == "name") {
      spec.name = v;
    } else if (k == "likelihood") {
      spec.likelihood.family = parse_likelihood(v);
    } else if (k == "dispersion") {
      dispersion = v;
    } else if (k == "predictor") {
      spec.predictor_terms = split_list(v);
    } else if (k != "gamma") {
      throw InputError("unknown key '" + k + "'");
    }
  }
  if (dispersion) spec.likelihood.dispersion_prior = parse_prior(*dispersion, gamma);

  for (const RawBlock& b : blocks) {
    const std::string where = " in " + b.kind + " '" + b.name + "'";
    if (b.kind == "level") {
      LevelSpec l;
      l.name = b.name;
      l.factor = b.name;
      l.sigma = std::nullopt;
      bool have_sigma = false, have_mu = false;
      for (const auto& [k, v] : b.entries) {
        if (k == "factor") {
          if (lower(v) == "none") {
            l.factor.reset();
          } else {
            l.factor = v;
          }
        } else if (k == "parent") {
          l.parent = v;
        } else if (k == "mu") {
          l.mu = parse_mean(v, gamma);
          have_mu = true;
        } else if (k == "sigma") {
          have_sigma = true;
          if (lower(v) != "none") l.sigma = parse_prior(v, gamma);
        } else if (k == "centered") {
          l.noncentered = !parse_bool(v, k + where);
        } else if (k == "noncentered") {
          l.noncentered = parse_bool(v, k + where);
        } else {
          throw InputError("unknown key '" + k + "'" + where);
        }
      }
      if (!have_sigma) throw InputError("missing sigma" + where + " (use 'sigma = none' for unpooled effects)");
      if (!have_mu && l.parent) l.mu = MeanSpec::inherit();
      spec.levels.push_back(std::move(l));
    } else {
      SlopeSpec s;
      s.name = b.name;
      s.covariate = b.name;
      bool have_mu = false, have_sigma = false;
      for (const auto& [k, v] : b.entries) {
        if (k == "covariate") {
          s.covariate = v;
        } else if (k == "by") {
          s.indexed_by = split_list(v);
        } else if (k == "mu") {
          s.mu_prior = parse_prior(v, gamma);
          have_mu = true;
        } else if (k == "sigma") {
          s.sigma_prior = parse_prior(v, gamma);
          have_sigma = true;
        } else if (k == "centered") {
          s.noncentered = !parse_bool(v, k + where);
        } else if (k == "noncentered") {
          s.noncentered = parse_bool(v, k + where);
        } else {
          throw InputError("unknown key '" + k + "'" + where);
        }
      }
      if (!have_mu || !have_sigma) throw InputError("slope needs mu and sigma" + where);
      spec.slopes.push_back(std::move(s));
    }
  }
  if (spec.name.empty()) spec.name = "model";
  return spec;
}

inline std::string json_text(const nlohmann::json& v, const std::string& what) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return csv::format_double(v.get<double>());
  throw InputError("expected a string for " + what);
}

inline ModelSpec parse_model_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("model JSON must be an object");
  GammaConvention gamma = GammaConvention::shape_rate;
  if (j.contains("gamma")) {
    const std::string g = lower(j.at("gamma").get<std::string>());
    if (g == "scale" || g == "shape_scale") {
      gamma = GammaConvention::shape_scale;
    } else if (g != "rate" && g != "shape_rate") {
      throw InputError("gamma must be 'rate' or 'scale'");
    }
  }
  ModelSpec spec;
  spec.name = j.value("name", std::string("model"));
  if (j.contains("likelihood")) spec.likelihood.family = parse_likelihood(j.at("likelihood").get<std::string>());
  if (j.contains("dispersion") && !j.at("dispersion").is_null()) {
    spec.likelihood.dispersion_prior = parse_prior(json_text(j.at("dispersion"), "dispersion"), gamma);
  }
  for (const auto& lj : j.value("levels", nlohmann::json::array())) {
    LevelSpec l;
    l.name = lj.at("name").get<std::string>();
    l.factor = l.name;
    if (lj.contains("factor")) {
      const auto& f = lj.at("factor");
      if (f.is_null() || lower(f.get<std::string>()) == "none") {
        l.factor.reset();
      } else {
        l.factor = f.get<std::string>();
      }
    }
    if (lj.contains("parent") && !lj.at("parent").is_null()) l.parent = lj.at("parent").get<std::string>();
    if (lj.contains("mu")) {
      l.mu = parse_mean(json_text(lj.at("mu"), "mu"), gamma);
    } else if (l.parent) {
      l.mu = MeanSpec::inherit();
    }
    if (!lj.contains("sigma")) throw InputError("level '" + l.name + "' missing sigma");
    if (!lj.at("sigma").is_null() && lower(json_text(lj.at("sigma"), "sigma")) != "none") {
      l.sigma = parse_prior(json_text(lj.at("sigma"), "sigma"), gamma);
    }
    if (lj.contains("centered")) l.noncentered = !lj.at("centered").get<bool>();
    if (lj.contains("noncentered")) l.noncentered = lj.at("noncentered").get<bool>();
    spec.levels.push_back(std::move(l));
  }
  for (const auto& sj : j.value("slopes", nlohmann::json::array())) {
    SlopeSpec s;
    s.name = sj.at("name").get<std::string>();
    s.covariate = sj.value("covariate", s.name);
    s.indexed_by = sj.value("by", std::vector<std::string>{});
    s.mu_prior = parse_prior(json_text(sj.at("mu"), "mu"), gamma);
    s.sigma_prior = parse_prior(json_text(sj.at("sigma"), "sigma"), gamma);
    if (sj.contains("centered")) s.noncentered = !sj.at("centered").get<bool>();
    if (sj.contains("noncentered")) s.noncentered = sj.at("noncentered").get<bool>();
    spec.slopes.push_back(std::move(s));
  }
  const auto& pj = j.value("predictor", nlohmann::json::array());
  if (pj.is_string()) {
    spec.predictor_terms = split_list(pj.get<std::string>());
  } else {
    spec.predictor_terms = pj.get<std::vector<std::string>>();
  }
  return spec;
}

}  // namespace detail

/// Parses the key/value block grammar, or its JSON equivalent when the text
/// starts with '{'. Defaults are applied and the result is checked.
inline ModelSpec parse_model_config(std::string_view text) {
  const std::string t = csv::trim(text);
  ModelSpec spec;
  if (!t.empty() && t.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("invalid model JSON: ") + e.what());
    }
    try {
      spec = detail::parse_model_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("invalid model JSON: ") + e.what());
    }
  } else {
    spec = detail::parse_model_text(t);
  }
  check_spec(spec);
  return spec;
}

/// Emits the block grammar; parse_model_config(serialize_model_config(s)) == s.
inline std::string serialize_model_config(const ModelSpec& spec) {
  std::ostringstream out;
  out << "name = " << spec.name << '\n';
  out << "likelihood = " << to_string(spec.likelihood.family) << '\n';
  if (spec.likelihood.dispersion_prior) out << "dispersion = " << spec.likelihood.dispersion_prior->to_string() << '\n';
  out << "gamma = rate\n";
  for (const auto& l : spec.levels) {
    out << "\nlevel " << l.name << " {\n";
    out << "  factor = " << (l.factor ? *l.factor : std::string("none")) << '\n';
    if (l.parent) out << "  parent = " << *l.parent << '\n';
    out << "  mu = " << l.mu.to_string() << '\n';
    out << "  sigma = " << (l.sigma ? l.sigma->to_string() : std::string("none")) << '\n';
    out << "  centered = " << (l.noncentered ? "false" : "true") << '\n';
    out << "}\n";
  }
  for (const auto& s : spec.slopes) {
    out << "\nslope " << s.name << " {\n";
    out << "  covariate = " << s.covariate << '\n';
    out << "  by = ";
    for (std::size_t i = 0; i < s.indexed_by.size(); ++i) out << (i ? ", " : "") << s.indexed_by[i];
    out << '\n';
    out << "  mu = " << s.mu_prior.to_string() << '\n';
    out << "  sigma = " << s.sigma_prior.to_string() << '\n';
    out << "  centered = " << (s.noncentered ? "false" : "true") << '\n';
    out << "}\n";
  }
  out << "\npredictor = ";
  for (std::size_t i = 0; i < spec.predictor_terms.size(); ++i) out << (i ? " + " : "") << spec.predictor_terms[i];
  out << '\n';
  return out.str();
}

/// `builtin:<name>` or a path to a config file.
inline ModelSpec resolve_model_ref(const std::string& ref) {
  if (ref.rfind("builtin:", 0) == 0) return builtin_spec(ref.substr(8));
  std::ifstream in(ref);
  if (!in) throw InputError("cannot open model config " + ref);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_config(ss.str());
}

// ---------------------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, std::size_t>> level_counts;  // factor -> number of levels

  bool ok() const { return errors.empty(); }
};

/// Checks a spec against a cell table. Problems are collected, not thrown.
inline ValidationReport validate_spec(const ModelSpec& spec, const CellTable& cells) {
  ValidationReport report;
  try {
    check_spec(spec);
  } catch (const SpecError& e) {
    report.errors.emplace_back(e.what());
  }
  for (const auto& f : spec.factors()) {
    const auto pos = cells.factor_position(f);
    if (!pos) {
      report.errors.push_back("factor " + f + " absent");
      continue;
    }
    const std::size_t count = cells.factors[*pos].size();
    report.level_counts.emplace_back(f, count);
    if (count == 1) report.warnings.push_back("factor " + f + " has a single level (degenerate pooling)");
  }
  for (const auto& c : spec.covariates()) {
    if (!cells.covariate_position(c)) report.errors.push_back("covariate " + c + " absent");
  }
  if (cells.empty()) report.warnings.push_back("cell table is empty; likelihood is vacuous");
  return report;
}

}  // namespace hieval
