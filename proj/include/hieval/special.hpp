#pragma once

// Scalar special functions and log-density kernels on plain doubles.
// The AD layer (ad.hpp) reuses these for values so that the double and
// taped evaluations of a log density agree bit-for-bit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "hieval/error.hpp"

namespace hieval::math {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178032973640562;
inline constexpr double kLogTwo = std::numbers::ln2;

/// log Γ(x) for x > 0. Thread-safe (does not touch the global signgam).
inline double lgamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("lgamma: argument must be positive");
  return boost::math::lgamma(x);
}

/// ψ(x) for x > 0: upward recurrence to x >= 10, then the asymptotic series.
inline double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_2k / (2k x^2k), k = 1..7
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

inline double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("log_beta: arguments must be positive");
  return lgamma(a) + lgamma(b) - lgamma(a + b);
}

/// Partial derivatives of log B(a, b): ψ(a) − ψ(a+b) and ψ(b) − ψ(a+b).
struct LogBetaGrad {
  double d_a;
  double d_b;
};

inline LogBetaGrad log_beta_grad(double a, double b) {
  const double common = digamma(a + b);
  return {digamma(a) - common, digamma(b) - common};
}

/// 1 / (1 + e^{-x}) evaluated without overflow for any finite x.
inline double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// log(1 + e^x) without overflow.
inline double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double log_choose(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) throw std::domain_error("log_choose: need 0 <= k <= n");
  if (k == 0 || k == n) return 0.0;
  return lgamma(static_cast<double>(n) + 1.0) - lgamma(static_cast<double>(k) + 1.0) -
         lgamma(static_cast<double>(n - k) + 1.0);
}

// ---------------------------------------------------------------------------
// Log-density kernels

inline double normal_lpdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - kLogSqrtTwoPi;
}

/// HalfNormal(scale) density at x >= 0, including the log 2 normalizer.
inline double half_normal_lpdf(double x, double scale) {
  const double z = x / scale;
  return kLogTwo - 0.5 * z * z - std::log(scale) - kLogSqrtTwoPi;
}

/// Gamma(shape, rate) density; takes log(x) separately so callers on a log
/// scale avoid a round trip through exp/log.
inline double gamma_lpdf(double x, double log_x, double shape, double rate) {
  return shape * std::log(rate) - lgamma(shape) + (shape - 1.0) * log_x - rate * x;
}

/// Binomial log pmf with logit-scale success probability.
inline double binomial_logit_lpmf(std::int64_t k, std::int64_t n, double eta, double log_choose_nk) {
  return log_choose_nk + static_cast<double>(k) * eta - static_cast<double>(n) * log1p_exp(eta);
}

/// d/dη of binomial_logit_lpmf.
inline double binomial_logit_dlpmf(std::int64_t k, std::int64_t n, double eta) {
  return static_cast<double>(k) - static_cast<double>(n) * inv_logit(eta);
}

/// log B(k+α, n−k+β) − log B(α, β) and its partials in α and β.
struct BetaBinomialKernel {
  double value;
  double d_alpha;
  double d_beta;
};

namespace detail {

// Rising-factorial form is exact for integer counts and much cheaper than
// lgamma/digamma; only used while the products stay inside double range.
inline bool rising_product_safe(std::int64_t n, double a, double b) {
  if (n > 64 || a < 1e-250 || b < 1e-250) return false;
  return static_cast<double>(n) * std::log(a + b + static_cast<double>(n)) < 650.0;
}

}  // namespace detail

inline BetaBinomialKernel beta_binomial_kernel(std::int64_t k, std::int64_t n, double alpha, double beta) {
  const double ab = alpha + beta;
  if (detail::rising_product_safe(n, alpha, beta)) {
    double pa = 1.0, pb = 1.0, pab = 1.0;
    double ga = 0.0, gb = 0.0, gab = 0.0;
    for (std::int64_t i = 0; i < k; ++i) {
      const double t = alpha + static_cast<double>(i);
      pa *= t;
      ga += 1.0 / t;
    }
    for (std::int64_t i = 0; i < n - k; ++i) {
      const double t = beta + static_cast<double>(i);
      pb *= t;
      gb += 1.0 / t;
    }
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = ab + static_cast<double>(i);
      pab *= t;
      gab += 1.0 / t;
    }
    return {std::log(pa) + std::log(pb) - std::log(pab), ga - gab, gb - gab};
  }
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  const double value = lgamma(kd + alpha) - lgamma(alpha) + lgamma(nd - kd + beta) - lgamma(beta) -
                       lgamma(nd + ab) + lgamma(ab);
  const double common = digamma(ab) - digamma(nd + ab);
  return {value, digamma(kd + alpha) - digamma(alpha) + common, digamma(nd - kd + beta) - digamma(beta) + common};
}

/// Marginal Beta-Binomial log pmf: log C(n,k) + log B(k+α, n−k+β) − log B(α, β).
inline double beta_binomial_lpmf(std::int64_t k, std::int64_t n, double alpha, double beta) {
  if (k < 0 || k > n) throw std::domain_error("beta_binomial_lpmf: need 0 <= k <= n");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::domain_error("beta_binomial_lpmf: alpha, beta must be positive");
  return log_choose(n, k) + beta_binomial_kernel(k, n, alpha, beta).value;
}

/// Beta-Binomial with mean inv_logit(eta) and concentration phi
/// (α = pφ, β = (1−p)φ). Returns value and partials in eta and phi.
struct BetaBinomialLogit {
  double value;
  double d_eta;
  double d_phi;
};

inline BetaBinomialLogit beta_binomial_logit(std::int64_t k, std::int64_t n, double eta, double phi,
                                             double log_choose_nk) {
  const double p = inv_logit(eta);
  const double q = inv_logit(-eta);
  const double alpha = p * phi;
  const double beta = q * phi;
  const BetaBinomialKernel kern = beta_binomial_kernel(k, n, alpha, beta);
  const double dp_deta = p * q;
  return {log_choose_nk + kern.value, (kern.d_alpha - kern.d_beta) * phi * dp_deta,
          kern.d_alpha * p + kern.d_beta * q};
}

}  // namespace hieval::math

namespace hieval::math {

// Plain-double counterparts of the taped primitives in ad.hpp. The density
// templates call these unqualified so the same source serves both scalars.

inline double value_of(double x) { return x; }

inline double sum(std::span<const double> xs) {
  double v = 0.0;
  for (double x : xs) v += x;
  return v;
}

inline double linear(double base, std::span<const double> xs, std::span<const double> coefs) {
  double v = base;
  for (std::size_t i = 0; i < xs.size(); ++i) v += coefs[i] * xs[i];
  return v;
}

inline double affine(double mean, double scale, double z) { return mean + scale * z; }

inline double beta_binomial_logit_lpmf(std::int64_t k, std::int64_t n, double eta, double phi,
                                       double log_choose_nk) {
  return beta_binomial_logit(k, n, eta, phi, log_choose_nk).value;
}

}  // namespace hieval::math
