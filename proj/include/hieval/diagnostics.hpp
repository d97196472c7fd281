#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hieval/density.hpp"
#include "hieval/error.hpp"
#include "hieval/layout.hpp"
#include "hieval/posterior.hpp"
#include "hieval/sampler.hpp"

namespace hieval {

using ChainSeries = std::vector<std::vector<double>>;  // chains x samples

namespace detail {

inline void check_series(const ChainSeries& x) {
  if (x.empty()) throw InputError("no chains");
  for (const auto& c : x) {
    if (c.size() != x.front().size()) throw InputError("chains have different lengths");
  }
  if (x.front().size() < 4) throw InputError("need at least 4 draws per chain");
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace detail

/// Split-R̂: every chain is halved (the middle draw of an odd-length chain is
/// dropped). nullopt when the within-chain variance is zero.
inline std::optional<double> split_rhat(const ChainSeries& chains) {
  detail::check_series(chains);
  const std::size_t n_full = chains.front().size();
  const std::size_t half = n_full / 2;
  std::vector<std::vector<double>> parts;
  for (const auto& c : chains) {
    parts.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    parts.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  const double n = static_cast<double>(half);
  std::vector<double> means, vars;
  for (const auto& p : parts) {
    means.push_back(detail::mean(p));
    vars.push_back(detail::sample_variance(p));
  }
  const double W = detail::mean(vars);
  if (!(W > 0.0)) return std::nullopt;
  const double B = n * detail::sample_variance(means);
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

/// Effective sample size across chains, from the combined autocorrelation
/// estimate truncated by Geyer's initial monotone sequence. Antithetic chains
/// can exceed the draw count; the integrated time is floored at 1/log10(N).
inline std::optional<double> ess(const ChainSeries& chains) {
  detail::check_series(chains);
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> chain_mean(m), chain_var(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_mean[c] = detail::mean(chains[c]);
    chain_var[c] = detail::sample_variance(chains[c]);
  }
  const double mean_var = detail::mean(chain_var);
  if (!(mean_var > 0.0)) return std::nullopt;
  double var_plus = mean_var * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
  if (m > 1) var_plus += detail::sample_variance(chain_mean);

  // Autocorrelation at lag t, combined over chains (biased autocovariance).
  auto rho = [&](std::size_t t) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = chains[c];
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - chain_mean[c]) * (x[i + t] - chain_mean[c]);
      acov += s / static_cast<double>(n);
    }
    acov /= static_cast<double>(m);
    return 1.0 - (mean_var - acov) / var_plus;
  };

  double gamma_prev = 1.0 + rho(1);  // ρ0 is 1 by construction
  double sum_gamma = gamma_prev;
  for (std::size_t k = 1; 2 * k + 1 < n; ++k) {
    double g = rho(2 * k) + rho(2 * k + 1);
    if (!(g > 0.0)) break;
    g = std::min(g, gamma_prev);
    sum_gamma += g;
    gamma_prev = g;
  }
  const double total = static_cast<double>(m * n);
  const double tau = std::max(-1.0 + 2.0 * sum_gamma, 1.0 / std::log10(total));
  return total / tau;
}

struct DivergenceCounts {
  std::vector<std::size_t> per_chain;
  std::size_t total = 0;
};

inline DivergenceCounts divergence_count(const Draws& draws) {
  DivergenceCounts out;
  for (const auto& ch : draws.chain) {
    std::size_t k = 0;
    for (const auto& s : ch.stats) k += s.divergent ? 1 : 0;
    out.per_chain.push_back(k);
    out.total += k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derived quantities

/// Composed effects per draw: `<level>_effect[g]` (logit), `<level>_p[g]`
/// (probability) and `<slope>[g]`.
struct DerivedDraws {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // per chain, samples x names.size()

  std::size_t width() const { return names.size(); }
};

inline std::vector<std::string> derived_names(const ParameterLayout& L) {
  std::vector<std::string> names;
  auto label = [](const std::string& base, const std::string& l) { return l.empty() ? base : base + "[" + l + "]"; };
  for (const LevelPlan& lp : L.levels) {
    for (const auto& g : lp.group_labels) names.push_back(label(lp.name + "_effect", g));
    for (const auto& g : lp.group_labels) names.push_back(label(lp.name + "_p", g));
  }
  for (const SlopePlan& sp : L.slopes) {
    for (const auto& g : sp.group_labels) names.push_back(label(sp.name, g));
  }
  return names;
}

inline DerivedDraws derive(const ParameterLayout& L, const Draws& draws) {
  ParameterLayout prior_layout = L;
  prior_layout.prior_only = true;
  const CellTable none;
  DerivedDraws out;
  out.names = derived_names(L);
  out.values.resize(draws.chains);
  std::vector<double> u(draws.dim);
  for (std::size_t c = 0; c < draws.chains; ++c) {
    auto& rows = out.values[c];
    rows.reserve(draws.samples * out.width());
    for (std::size_t s = 0; s < draws.samples; ++s) {
      for (std::size_t d = 0; d < draws.dim; ++d) u[d] = draws.at(c, s, d);
      const Evaluation<double> ev = evaluate<double>(prior_layout, u, none);
      for (const auto& eff : ev.level_effects) {
        rows.insert(rows.end(), eff.begin(), eff.end());
        for (double e : eff) rows.push_back(math::inv_logit(e));
      }
      for (const auto& sv : ev.slope_values) rows.insert(rows.end(), sv.begin(), sv.end());
    }
  }
  return out;
}

inline ChainSeries derived_series(const DerivedDraws& d, std::size_t column) {
  ChainSeries out(d.values.size());
  const std::size_t w = d.width();
  for (std::size_t c = 0; c < d.values.size(); ++c) {
    const std::size_t samples = d.values[c].size() / w;
    out[c].resize(samples);
    for (std::size_t s = 0; s < samples; ++s) out[c][s] = d.values[c][s * w + column];
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  double hpdi_low = 0.0;
  double hpdi_high = 0.0;
  std::optional<double> n_eff;
  std::optional<double> r_hat;
  std::size_t divergences = 0;
};

inline SummaryRow summarize(const std::string& name, const ChainSeries& series, double mass, std::size_t divergences) {
  std::vector<double> pooled;
  for (const auto& c : series) pooled.insert(pooled.end(), c.begin(), c.end());
  SummaryRow row;
  row.parameter = name;
  row.mean = detail::mean(pooled);
  row.sd = pooled.size() > 1 ? std::sqrt(detail::sample_variance(pooled)) : 0.0;
  if (pooled.size() >= 10) {
    const Interval h = hpdi(pooled, mass);
    row.hpdi_low = h.low;
    row.hpdi_high = h.high;
  } else {
    row.hpdi_low = *std::min_element(pooled.begin(), pooled.end());
    row.hpdi_high = *std::max_element(pooled.begin(), pooled.end());
  }
  if (series.front().size() >= 4) {
    row.n_eff = ess(series);
    row.r_hat = split_rhat(series);
  }
  row.divergences = divergences;
  return row;
}

/// One row per constrained scalar parameter followed by one per derived
/// effect. Per-cell probabilities are not included.
inline std::vector<SummaryRow> summary_table(const Draws& draws, const ParameterLayout& L, double mass = 0.95) {
  if (draws.samples == 0 || draws.chains == 0) throw InputError("no draws to summarize");
  const std::size_t div = divergence_count(draws).total;
  std::vector<SummaryRow> rows;
  const auto names = L.element_names();
  for (std::size_t d = 0; d < draws.dim; ++d) rows.push_back(summarize(names[d], draws.parameter(d), mass, div));
  const DerivedDraws derived = derive(L, draws);
  for (std::size_t j = 0; j < derived.width(); ++j) {
    rows.push_back(summarize(derived.names[j], derived_series(derived, j), mass, div));
  }
  return rows;
}

/// Summary for a generic target (unconstrained coordinates only).
inline std::vector<SummaryRow> summary_table(const Draws& draws, double mass = 0.95) {
  if (draws.samples == 0 || draws.chains == 0) throw InputError("no draws to summarize");
  const std::size_t div = divergence_count(draws).total;
  std::vector<SummaryRow> rows;
  for (std::size_t d = 0; d < draws.dim; ++d) rows.push_back(summarize(draws.names[d], draws.parameter(d), mass, div));
  return rows;
}

/// Exact post-warmup sequence of a parameter or derived quantity, per chain.
inline ChainSeries trace_series(const Draws& draws, const ParameterLayout& L, const std::string& parameter) {
  const auto names = L.element_names();
  for (std::size_t d = 0; d < names.size(); ++d) {
    if (names[d] == parameter) return draws.parameter(d);
  }
  const auto dnames = derived_names(L);
  for (std::size_t j = 0; j < dnames.size(); ++j) {
    if (dnames[j] == parameter) return derived_series(derive(L, draws), j);
  }
  throw InputError("unknown parameter '" + parameter + "'");
}

}  // namespace hieval
