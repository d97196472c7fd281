#pragma once

// Joint log posterior of a compiled layout, on the unconstrained scale.
//
// evaluate() is a template over the scalar type so that the plain-double path
// and the taped path (ad::Var) run the same sequence of primitives.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hieval/ad.hpp"
#include "hieval/dataset.hpp"
#include "hieval/error.hpp"
#include "hieval/layout.hpp"
#include "hieval/special.hpp"

namespace hieval {

/// Log posterior split into its three additive parts.
struct LogPosteriorParts {
  double prior = 0.0;
  double jacobian = 0.0;
  double likelihood = 0.0;

  double total() const { return prior + jacobian + likelihood; }
};

template <class T>
struct Evaluation {
  T prior{0.0};
  T jacobian{0.0};
  T likelihood{0.0};
  T total{0.0};
  std::vector<T> constrained;  // per element
  std::vector<std::vector<T>> level_means;
  std::vector<std::vector<T>> level_effects;
  std::vector<std::vector<T>> slope_values;
  std::vector<T> eta;
  std::vector<T> pointwise;
  T phi{0.0};
};

namespace detail {

template <class T>
T prior_lpdf(const PriorSpec& p, const T& x, const T& u) {
  using ad::gamma_lpdf;
  using ad::half_normal_lpdf;
  using ad::normal_lpdf;
  using math::gamma_lpdf;
  using math::half_normal_lpdf;
  using math::normal_lpdf;
  switch (p.family) {
    case PriorSpec::Family::normal: return normal_lpdf(x, T(p.a), T(p.b));
    case PriorSpec::Family::half_normal: return half_normal_lpdf(x, p.a);
    case PriorSpec::Family::gamma: return gamma_lpdf(x, u, p.a, p.b);
  }
  return T(0.0);
}

}  // namespace detail

namespace detail {

/// Predictor of cell c from the current group values: Σ coef_t · value_t.
template <class T>
double cell_eta(const ParameterLayout& L, const Evaluation<T>& ev, std::size_t c) {
  using ad::value_of;
  using math::value_of;
  const std::size_t nt = L.terms.size();
  double eta = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const TermBinding& b = L.terms[t];
    const std::uint32_t g = L.cell_group[c * nt + t];
    const T& x = b.is_slope ? ev.slope_values[b.index][g] : ev.level_effects[b.index][g];
    eta += L.cell_coef[c * nt + t] * value_of(x);
  }
  return eta;
}

inline double cell_log_lik(const ParameterLayout& L, const Cell& cell, std::size_t c, double eta, double phi) {
  return L.betabinomial() ? math::beta_binomial_logit_lpmf(cell.successes, cell.trials, eta, phi, L.cell_log_choose[c])
                          : math::binomial_logit_lpmf(cell.successes, cell.trials, eta, L.cell_log_choose[c]);
}

inline void add_likelihood(const ParameterLayout& L, const CellTable& cells, Evaluation<double>& ev) {
  ev.eta.resize(L.n_cells);
  ev.pointwise.resize(L.n_cells);
  for (std::size_t c = 0; c < L.n_cells; ++c) {
    ev.eta[c] = cell_eta(L, ev, c);
    ev.pointwise[c] = cell_log_lik(L, cells.cells[c], c, ev.eta[c], ev.phi);
  }
  ev.likelihood = math::sum(std::span<const double>(ev.pointwise));
}

/// The whole likelihood as one tape node. Cell terms are evaluated on plain
/// doubles and their derivatives are summed per group value, so the tape
/// grows with the number of groups rather than the number of cells.
inline void add_likelihood(const ParameterLayout& L, const CellTable& cells, Evaluation<ad::Var>& ev) {
  thread_local std::vector<std::vector<double>> level_adj, slope_adj;
  level_adj.resize(ev.level_effects.size());
  slope_adj.resize(ev.slope_values.size());
  for (std::size_t i = 0; i < level_adj.size(); ++i) level_adj[i].assign(ev.level_effects[i].size(), 0.0);
  for (std::size_t i = 0; i < slope_adj.size(); ++i) slope_adj[i].assign(ev.slope_values[i].size(), 0.0);

  const std::size_t nt = L.terms.size();
  const double phi = ev.phi.value();
  double total = 0.0;
  double d_phi = 0.0;
  ev.eta.resize(L.n_cells);
  ev.pointwise.resize(L.n_cells);
  for (std::size_t c = 0; c < L.n_cells; ++c) {
    const Cell& cell = cells.cells[c];
    const double eta = cell_eta(L, ev, c);
    double value, d_eta;
    if (L.betabinomial()) {
      const math::BetaBinomialLogit r =
          math::beta_binomial_logit(cell.successes, cell.trials, eta, phi, L.cell_log_choose[c]);
      value = r.value;
      d_eta = r.d_eta;
      d_phi += r.d_phi;
    } else {
      value = math::binomial_logit_lpmf(cell.successes, cell.trials, eta, L.cell_log_choose[c]);
      d_eta = math::binomial_logit_dlpmf(cell.successes, cell.trials, eta);
    }
    ev.eta[c] = ad::Var(eta);
    ev.pointwise[c] = ad::Var(value);
    total += value;
    for (std::size_t t = 0; t < nt; ++t) {
      const TermBinding& b = L.terms[t];
      auto& adj = b.is_slope ? slope_adj[b.index] : level_adj[b.index];
      adj[L.cell_group[c * nt + t]] += L.cell_coef[c * nt + t] * d_eta;
    }
  }

  thread_local std::vector<ad::Var> operands;
  thread_local std::vector<double> partials;
  operands.clear();
  partials.clear();
  ad::Tape* tape = nullptr;
  auto add = [&](const ad::Var& v, double d) {
    if (v.is_constant() || d == 0.0) return;
    tape = v.tape();
    operands.push_back(v);
    partials.push_back(d);
  };
  for (std::size_t i = 0; i < level_adj.size(); ++i) {
    for (std::size_t g = 0; g < level_adj[i].size(); ++g) add(ev.level_effects[i][g], level_adj[i][g]);
  }
  for (std::size_t i = 0; i < slope_adj.size(); ++i) {
    for (std::size_t g = 0; g < slope_adj[i].size(); ++g) add(ev.slope_values[i][g], slope_adj[i][g]);
  }
  if (L.betabinomial()) add(ev.phi, d_phi);
  ev.likelihood = tape ? tape->record_linear(total, operands, partials) : ad::Var(total);
}

}  // namespace detail

/// Evaluates every component of the log posterior at unconstrained `u`.
template <class T>
Evaluation<T> evaluate(const ParameterLayout& L, std::span<const T> u, const CellTable& cells) {
  using ad::affine;
  using ad::exp;
  using ad::normal_lpdf;
  using ad::sum;
  using math::affine;
  using math::normal_lpdf;
  using math::sum;
  using std::exp;

  if (u.size() != L.total_dim) {
    throw InputError("point has " + std::to_string(u.size()) + " coordinates, layout expects " +
                     std::to_string(L.total_dim));
  }
  if (!L.prior_only && cells.size() != L.n_cells) throw InputError("cell table does not match layout");

  Evaluation<T> ev;
  ev.constrained.resize(L.total_dim);
  std::vector<T> prior_terms;
  prior_terms.reserve(L.total_dim);
  std::vector<T> log_u;  // unconstrained coordinates of log-transformed entries, summed for the Jacobian
  for (const LayoutEntry& e : L.entries) {
    for (std::size_t i = 0; i < e.size; ++i) {
      const std::size_t k = e.offset + i;
      if (e.transform == Transform::log) {
        ev.constrained[k] = exp(u[k]);
        log_u.push_back(u[k]);
      } else {
        ev.constrained[k] = u[k];
      }
      if (e.prior) prior_terms.push_back(detail::prior_lpdf(*e.prior, ev.constrained[k], u[k]));
    }
  }
  const T* x = ev.constrained.data();

  ev.level_means.resize(L.levels.size());
  ev.level_effects.resize(L.levels.size());
  for (std::size_t li = 0; li < L.levels.size(); ++li) {
    const LevelPlan& lp = L.levels[li];
    const std::size_t ng = lp.groups();
    auto& means = ev.level_means[li];
    auto& effects = ev.level_effects[li];
    means.resize(ng);
    effects.resize(ng);
    const std::vector<T>* parent = lp.parent == kNoEntry ? nullptr : &ev.level_effects[lp.parent];
    for (std::size_t g = 0; g < ng; ++g) {
      const std::uint32_t pg = lp.parent_group[g];
      T m;
      if (lp.mean_kind == MeanSpec::Kind::prior) {
        const T& mu = x[L.entries[lp.mu_entry].offset + (lp.pooled ? pg : g)];
        m = parent ? (*parent)[pg] + mu : mu;
      } else if (parent) {
        m = lp.fixed_value == 0.0 ? (*parent)[pg] : (*parent)[pg] + T(lp.fixed_value);
      } else {
        m = T(lp.fixed_value);
      }
      means[g] = m;
    }
    if (!lp.pooled) {
      effects = means;
      continue;
    }
    const T& sigma = x[L.entries[lp.sigma_entry].offset];
    const std::size_t zo = L.entries[lp.z_entry].offset;
    for (std::size_t g = 0; g < ng; ++g) {
      if (lp.noncentered) {
        effects[g] = affine(means[g], sigma, x[zo + g]);
      } else {
        effects[g] = x[zo + g];
        prior_terms.push_back(normal_lpdf(effects[g], means[g], sigma));
      }
    }
  }

  ev.slope_values.resize(L.slopes.size());
  for (std::size_t si = 0; si < L.slopes.size(); ++si) {
    const SlopePlan& sp = L.slopes[si];
    auto& vals = ev.slope_values[si];
    vals.resize(sp.groups());
    const std::size_t mo = L.entries[sp.mu_entry].offset;
    const T& sigma = x[L.entries[sp.sigma_entry].offset];
    const std::size_t zo = L.entries[sp.z_entry].offset;
    for (std::size_t g = 0; g < sp.groups(); ++g) {
      if (sp.noncentered) {
        vals[g] = affine(x[mo + g], sigma, x[zo + g]);
      } else {
        vals[g] = x[zo + g];
        prior_terms.push_back(normal_lpdf(vals[g], x[mo + g], sigma));
      }
    }
  }

  if (L.dispersion_entry != kNoEntry) ev.phi = x[L.entries[L.dispersion_entry].offset];

  ev.prior = sum(std::span<const T>(prior_terms));
  ev.jacobian = sum(std::span<const T>(log_u));

  if (!L.prior_only) detail::add_likelihood(L, cells, ev);
  ev.total = ev.prior + ev.jacobian + ev.likelihood;
  return ev;
}

namespace detail {
inline void require_finite(std::span<const double> u) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i])) throw NumericError("non-finite coordinate " + std::to_string(i) + " in point");
  }
}
}  // namespace detail

inline LogPosteriorParts log_posterior_parts(const ParameterLayout& L, std::span<const double> u,
                                             const CellTable& cells) {
  detail::require_finite(u);
  const Evaluation<double> ev = evaluate<double>(L, u, cells);
  return {ev.prior, ev.jacobian, ev.likelihood};
}

/// log prior + log likelihood + log|Jacobian| at unconstrained `u`.
inline double log_posterior(const ParameterLayout& L, std::span<const double> u, const CellTable& cells) {
  detail::require_finite(u);
  return evaluate<double>(L, u, cells).total;
}

// ---------------------------------------------------------------------------

/// A point mapped to the constrained scale, with the composed effects.
struct ConstrainedDraw {
  std::vector<double> values;  // per layout element, constrained scale
  std::vector<std::vector<double>> level_means;
  std::vector<std::vector<double>> level_effects;  // logit scale
  std::vector<std::vector<double>> slope_values;
  std::vector<double> eta;  // per cell
  std::vector<double> p;    // per cell
  double phi = std::nan("");

  double alpha(std::size_t cell) const { return p[cell] * phi; }
  double beta(std::size_t cell) const { return math::inv_logit(-eta[cell]) * phi; }
};

inline ConstrainedDraw constrain(const ParameterLayout& L, std::span<const double> u, const CellTable& cells) {
  detail::require_finite(u);
  Evaluation<double> ev = evaluate<double>(L, u, cells);
  ConstrainedDraw d;
  d.values = std::move(ev.constrained);
  d.level_means = std::move(ev.level_means);
  d.level_effects = std::move(ev.level_effects);
  d.slope_values = std::move(ev.slope_values);
  d.eta = std::move(ev.eta);
  d.p.reserve(d.eta.size());
  for (double e : d.eta) d.p.push_back(math::inv_logit(e));
  if (L.dispersion_entry != kNoEntry) d.phi = ev.phi;
  return d;
}

/// Per-cell log likelihood under a constrained draw.
inline std::vector<double> pointwise_log_lik(const ParameterLayout& L, const ConstrainedDraw& d,
                                             const CellTable& cells) {
  if (d.eta.size() != cells.size() || L.n_cells != cells.size()) {
    throw InputError("draw has " + std::to_string(d.eta.size()) + " cells, table has " +
                     std::to_string(cells.size()));
  }
  std::vector<double> out(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells.cells[c];
    out[c] = L.betabinomial()
                 ? math::beta_binomial_logit_lpmf(cell.successes, cell.trials, d.eta[c], d.phi, L.cell_log_choose[c])
                 : math::binomial_logit_lpmf(cell.successes, cell.trials, d.eta[c], L.cell_log_choose[c]);
  }
  return out;
}

/// Convenience: Beta-Binomial log pmf under the (α, β) parameterization.
inline double betabinomial_log_pmf(std::int64_t k, std::int64_t n, double alpha, double beta) {
  return math::beta_binomial_lpmf(k, n, alpha, beta);
}

// ---------------------------------------------------------------------------

struct PriorPredictive {
  std::vector<double> point;  // unconstrained
  ConstrainedDraw draw;
  std::vector<std::int64_t> k;  // simulated successes per cell
};

namespace detail {

inline double sample_prior(const PriorSpec& p, std::mt19937_64& rng) {
  switch (p.family) {
    case PriorSpec::Family::normal: return std::normal_distribution<double>(p.a, p.b)(rng);
    case PriorSpec::Family::half_normal: return std::abs(std::normal_distribution<double>(0.0, p.a)(rng));
    case PriorSpec::Family::gamma: return std::gamma_distribution<double>(p.a, 1.0 / p.b)(rng);
  }
  return 0.0;
}

}  // namespace detail

/// Ancestral draw of all parameters from their priors, then k per cell.
inline PriorPredictive prior_predictive_draw(const ParameterLayout& L, const CellTable& cells, std::mt19937_64& rng) {
  PriorPredictive out;
  out.point.assign(L.total_dim, 0.0);
  for (const LayoutEntry& e : L.entries) {
    if (!e.prior) continue;
    for (std::size_t i = 0; i < e.size; ++i) {
      double v = detail::sample_prior(*e.prior, rng);
      if (e.transform == Transform::log) v = std::log(std::max(v, 1e-300));
      out.point[e.offset + i] = v;
    }
  }
  // Centered effects depend on their level's mean and scale, so fill them in level order.
  for (std::size_t li = 0; li < L.levels.size(); ++li) {
    const LevelPlan& lp = L.levels[li];
    if (!lp.pooled || lp.noncentered) continue;
    const ConstrainedDraw d = constrain(L, out.point, cells);
    const double sigma = d.values[L.entries[lp.sigma_entry].offset];
    for (std::size_t g = 0; g < lp.groups(); ++g) {
      out.point[L.entries[lp.z_entry].offset + g] =
          std::normal_distribution<double>(d.level_means[li][g], sigma)(rng);
    }
  }
  for (const SlopePlan& sp : L.slopes) {
    if (sp.noncentered) continue;
    const double sigma = std::exp(out.point[L.entries[sp.sigma_entry].offset]);
    for (std::size_t g = 0; g < sp.groups(); ++g) {
      const double mu = out.point[L.entries[sp.mu_entry].offset + g];
      out.point[L.entries[sp.z_entry].offset + g] = std::normal_distribution<double>(mu, sigma)(rng);
    }
  }
  out.draw = constrain(L, out.point, cells);
  out.k.resize(out.draw.p.size());
  for (std::size_t c = 0; c < out.draw.p.size(); ++c) {
    double p = out.draw.p[c];
    if (L.betabinomial()) {
      const double a = std::gamma_distribution<double>(std::max(out.draw.alpha(c), 1e-300), 1.0)(rng);
      const double b = std::gamma_distribution<double>(std::max(out.draw.beta(c), 1e-300), 1.0)(rng);
      p = a + b > 0.0 ? a / (a + b) : 0.5;
    }
    out.k[c] = std::binomial_distribution<std::int64_t>(cells.cells[c].trials, p)(rng);
  }
  return out;
}

}  // namespace hieval
