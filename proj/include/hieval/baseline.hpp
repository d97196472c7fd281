#pragma once

// Conventional statistics kept for side-by-side contrast with the posterior:
// empirical mean with its standard error, and Student t tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "hieval/error.hpp"

namespace hieval {

struct MeanSem {
  double mean = 0.0;
  std::optional<double> sem;  // nullopt when n == 1
  std::size_t n = 0;
};

inline MeanSem mean_sem(std::span<const double> x) {
  if (x.empty()) throw InputError("mean_sem of an empty sample");
  MeanSem r;
  r.n = x.size();
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.sem = std::sqrt(ss / static_cast<double>(r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

/// Mean and SEM of k successes out of n binary outcomes, without expanding them.
inline MeanSem mean_sem_counts(std::int64_t k, std::int64_t n) {
  if (n < 1) throw InputError("mean_sem of an empty sample");
  MeanSem r;
  r.n = static_cast<std::size_t>(n);
  r.mean = static_cast<double>(k) / static_cast<double>(n);
  if (n > 1) {
    const double ss = static_cast<double>(k) * (1.0 - r.mean) * (1.0 - r.mean) +
                      static_cast<double>(n - k) * r.mean * r.mean;
    r.sem = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  }
  return r;
}

/// Two-sided tail P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2).
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw InputError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return boost::math::ibeta(df / 2.0, 0.5, x);
}

inline double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw InputError("degrees of freedom must be positive");
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

enum class TTestMethod { independent_welch, independent_pooled, paired };

inline std::string_view to_string(TTestMethod m) {
  switch (m) {
    case TTestMethod::independent_welch: return "independent-welch";
    case TTestMethod::independent_pooled: return "independent-pooled";
    case TTestMethod::paired: return "paired";
  }
  return "";
}

struct ImbalancePolicy {
  enum class Kind { error, subsample, truncate };
  Kind kind = Kind::error;
  std::uint64_t seed = 0;

  static ImbalancePolicy error() { return {Kind::error, 0}; }
  static ImbalancePolicy subsample(std::uint64_t seed) { return {Kind::subsample, seed}; }
  static ImbalancePolicy truncate() { return {Kind::truncate, 0}; }

  std::string to_string() const {
    switch (kind) {
      case Kind::error: return "error";
      case Kind::subsample: return "subsample(" + std::to_string(seed) + ")";
      case Kind::truncate: return "truncate";
    }
    return "";
  }
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  TTestMethod method = TTestMethod::independent_welch;
  std::string imbalance_policy;  // paired only
};

namespace detail {
struct Moments {
  double mean;
  double var;
  double n;
};

inline Moments moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, ss / (n - 1.0), n};
}
}  // namespace detail

inline TTestResult t_test_independent(std::span<const double> x, std::span<const double> y,
                                      TTestMethod variant = TTestMethod::independent_welch) {
  if (x.size() < 2 || y.size() < 2) throw InputError("each group needs at least 2 observations");
  if (variant == TTestMethod::paired) throw InputError("use t_test_paired for paired samples");
  const auto a = detail::moments(x);
  const auto b = detail::moments(y);
  if (a.var == 0.0 && b.var == 0.0) throw InputError("both groups have zero variance");
  TTestResult r;
  r.method = variant;
  if (variant == TTestMethod::independent_pooled) {
    const double sp2 = ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / (a.n + b.n - 2.0);
    r.t = (a.mean - b.mean) / std::sqrt(sp2 * (1.0 / a.n + 1.0 / b.n));
    r.df = a.n + b.n - 2.0;
  } else {
    const double va = a.var / a.n;
    const double vb = b.var / b.n;
    r.t = (a.mean - b.mean) / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0));
  }
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

/// One-sample t on the differences. Unequal lengths are resolved by the
/// policy: reject, truncate both to the shorter length, or draw a seeded
/// subsample (order preserved) of the longer one. Padding is never done.
inline TTestResult t_test_paired(std::span<const double> x, std::span<const double> y,
                                 ImbalancePolicy policy = ImbalancePolicy::error()) {
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  if (a.size() != b.size()) {
    const std::size_t n = std::min(a.size(), b.size());
    switch (policy.kind) {
      case ImbalancePolicy::Kind::error:
        throw InputError("length mismatch: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
      case ImbalancePolicy::Kind::truncate:
        a.resize(n);
        b.resize(n);
        break;
      case ImbalancePolicy::Kind::subsample: {
        std::vector<double>& longer = a.size() > b.size() ? a : b;
        std::vector<std::size_t> idx(longer.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(policy.seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        std::vector<double> kept;
        kept.reserve(n);
        for (std::size_t i : idx) kept.push_back(longer[i]);
        longer = std::move(kept);
        break;
      }
    }
  }
  if (a.size() < 2) throw InputError("paired test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  const auto m = detail::moments(d);
  if (m.var == 0.0) throw InputError("zero-variance differences; the paired t statistic is undefined");
  TTestResult r;
  r.method = TTestMethod::paired;
  r.imbalance_policy = policy.to_string();
  r.t = m.mean / std::sqrt(m.var / m.n);
  r.df = m.n - 1.0;
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

}  // namespace hieval
