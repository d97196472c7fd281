#pragma once

// WAIC from pointwise log-likelihoods (one column per cell) and ranking of
// several fits on the elpd scale, where higher is better.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hieval/error.hpp"

namespace hieval {

struct LogLikMatrix {
  std::string model;
  std::size_t draws = 0;
  std::size_t cells = 0;
  std::vector<double> values;  // draws x cells, row-major
  std::vector<std::string> cell_keys;

  double at(std::size_t s, std::size_t i) const { return values[s * cells + i]; }
};

struct WaicResult {
  std::string model;
  double lppd = 0.0;
  double elpd_waic = 0.0;
  double p_waic = 0.0;
  double waic_deviance = 0.0;  // -2 * elpd_waic
  double se = 0.0;
  std::vector<double> pointwise;  // elpd contribution per cell
  std::vector<double> pointwise_lppd;
  std::vector<double> pointwise_p;
  std::vector<std::string> cell_keys;
  std::size_t draws = 0;

  bool few_draws() const { return draws < 100; }
};

namespace detail {

inline double sample_var(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline WaicResult finish_waic(std::string model, std::vector<std::string> keys, std::vector<double> lppd,
                              std::vector<double> p, std::size_t draws) {
  WaicResult r;
  r.model = std::move(model);
  r.cell_keys = std::move(keys);
  r.draws = draws;
  r.pointwise.resize(lppd.size());
  for (std::size_t i = 0; i < lppd.size(); ++i) {
    r.pointwise[i] = lppd[i] - p[i];
    r.lppd += lppd[i];
    r.p_waic += p[i];
    r.elpd_waic += r.pointwise[i];
  }
  r.waic_deviance = -2.0 * r.elpd_waic;
  r.se = std::sqrt(static_cast<double>(r.pointwise.size()) * sample_var(r.pointwise));
  r.pointwise_lppd = std::move(lppd);
  r.pointwise_p = std::move(p);
  return r;
}

}  // namespace detail

/// lppd_i = log mean_s exp(ll[s,i]); p_i = sample variance over s of ll[s,i];
/// elpd = Σ (lppd_i − p_i); se = sqrt(N · var_i(lppd_i − p_i)).
inline WaicResult waic(const LogLikMatrix& m) {
  if (m.cells < 1) throw InputError("WAIC needs at least one cell");
  if (m.draws < 2) throw InputError("WAIC needs at least two draws");
  if (m.values.size() != m.draws * m.cells) throw InputError("log-likelihood matrix has the wrong size");
  for (double v : m.values) {
    if (!std::isfinite(v)) throw NumericError("non-finite entry in log-likelihood matrix of " + m.model);
  }
  const double S = static_cast<double>(m.draws);
  std::vector<double> lppd(m.cells), p(m.cells);
  for (std::size_t i = 0; i < m.cells; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (std::size_t s = 0; s < m.draws; ++s) {
      mx = std::max(mx, m.at(s, i));
      mean += m.at(s, i);
    }
    mean /= S;
    double acc = 0.0, ss = 0.0;
    for (std::size_t s = 0; s < m.draws; ++s) {
      acc += std::exp(m.at(s, i) - mx);
      ss += (m.at(s, i) - mean) * (m.at(s, i) - mean);
    }
    lppd[i] = mx + std::log(acc) - std::log(S);
    p[i] = ss / (S - 1.0);
  }
  std::vector<std::string> keys = m.cell_keys;
  if (keys.empty()) {
    for (std::size_t i = 0; i < m.cells; ++i) keys.push_back(std::to_string(i));
  }
  return detail::finish_waic(m.model, std::move(keys), std::move(lppd), std::move(p), m.draws);
}

/// Streaming WAIC: feed one row of pointwise log-likelihoods per draw.
class WaicAccumulator {
 public:
  WaicAccumulator(std::string model, std::vector<std::string> cell_keys)
      : model_(std::move(model)),
        keys_(std::move(cell_keys)),
        max_(keys_.size(), -std::numeric_limits<double>::infinity()),
        sum_exp_(keys_.size(), 0.0),
        mean_(keys_.size(), 0.0),
        m2_(keys_.size(), 0.0) {}

  void add(const std::vector<double>& row) {
    if (row.size() != keys_.size()) throw InputError("log-likelihood row has the wrong size");
    ++n_;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double x = row[i];
      if (!std::isfinite(x)) throw NumericError("non-finite pointwise log-likelihood for cell " + keys_[i]);
      if (x > max_[i]) {
        sum_exp_[i] = sum_exp_[i] * std::exp(max_[i] - x) + 1.0;
        max_[i] = x;
      } else {
        sum_exp_[i] += std::exp(x - max_[i]);
      }
      const double d = x - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (x - mean_[i]);
    }
  }

  WaicResult result() const {
    if (n_ < 2) throw InputError("WAIC needs at least two draws");
    const double S = static_cast<double>(n_);
    std::vector<double> lppd(keys_.size()), p(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      lppd[i] = max_[i] + std::log(sum_exp_[i]) - std::log(S);
      p[i] = m2_[i] / (S - 1.0);
    }
    return detail::finish_waic(model_, keys_, std::move(lppd), std::move(p), n_);
  }

 private:
  std::string model_;
  std::vector<std::string> keys_;
  std::vector<double> max_, sum_exp_, mean_, m2_;
  std::size_t n_ = 0;
};

struct WaicDiff {
  double delta_elpd = 0.0;
  double se_delta = 0.0;
};

inline void check_aligned(const WaicResult& a, const WaicResult& b) {
  if (a.pointwise.size() != b.pointwise.size() || a.cell_keys != b.cell_keys) {
    throw InputError("mismatched cells between '" + a.model + "' and '" + b.model +
                     "'; models must be fitted to the same cell table");
  }
}

/// delta = elpd_a − elpd_b; se = sqrt(N · var_i(a_i − b_i)).
inline WaicDiff waic_diff(const WaicResult& a, const WaicResult& b) {
  check_aligned(a, b);
  std::vector<double> d(a.pointwise.size());
  WaicDiff out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = a.pointwise[i] - b.pointwise[i];
    out.delta_elpd += d[i];
  }
  out.se_delta = std::sqrt(static_cast<double>(d.size()) * detail::sample_var(d));
  return out;
}

struct RankEntry {
  std::size_t index = 0;  // position in the input list
  std::string model;
  double elpd_waic = 0.0;
  double p_waic = 0.0;
  double waic_deviance = 0.0;
  double se = 0.0;
  double delta_vs_best = 0.0;  // elpd − best elpd (≤ 0)
  double se_delta = 0.0;
  bool indistinct_from_best = false;
};

struct PairwiseDiff {
  std::size_t better = 0;  // indices into Ranking::entries
  std::size_t worse = 0;
  double delta_elpd = 0.0;
  double se_delta = 0.0;
  bool indistinct = false;  // |delta| <= 2 se
};

struct Ranking {
  std::vector<RankEntry> entries;  // descending elpd
  std::vector<PairwiseDiff> pairs;
};

inline Ranking rank_models(const std::vector<WaicResult>& results) {
  if (results.size() < 2) throw InputError("need >= 2 models to compare");
  for (std::size_t i = 1; i < results.size(); ++i) check_aligned(results[0], results[i]);
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return results[a].elpd_waic > results[b].elpd_waic; });
  Ranking r;
  const WaicResult& best = results[order.front()];
  for (std::size_t idx : order) {
    const WaicResult& w = results[idx];
    RankEntry e;
    e.index = idx;
    e.model = w.model;
    e.elpd_waic = w.elpd_waic;
    e.p_waic = w.p_waic;
    e.waic_deviance = w.waic_deviance;
    e.se = w.se;
    if (idx != order.front()) {
      const WaicDiff d = waic_diff(w, best);
      e.delta_vs_best = d.delta_elpd;
      e.se_delta = d.se_delta;
      e.indistinct_from_best = std::abs(d.delta_elpd) <= 2.0 * d.se_delta;
    }
    r.entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const WaicDiff d = waic_diff(results[order[i]], results[order[j]]);
      r.pairs.push_back({i, j, d.delta_elpd, d.se_delta, std::abs(d.delta_elpd) <= 2.0 * d.se_delta});
    }
  }
  return r;
}

}  // namespace hieval
