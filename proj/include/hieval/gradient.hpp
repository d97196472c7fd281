#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hieval/ad.hpp"
#include "hieval/density.hpp"
#include "hieval/error.hpp"

namespace hieval {

struct GradResult {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace detail {

inline ad::Tape& thread_tape() {
  thread_local ad::Tape tape;
  return tape;
}

}  // namespace detail

/// Value and gradient without throwing; returns false if anything is non-finite.
/// `out.gradient` must already have the layout's dimension.
inline bool try_grad_log_posterior(const ParameterLayout& L, std::span<const double> u, const CellTable& cells,
                                   GradResult& out) {
  ad::Tape& tape = detail::thread_tape();
  tape.clear();
  thread_local std::vector<ad::Var> vars;
  vars.clear();
  vars.reserve(u.size());
  for (double v : u) vars.push_back(tape.variable(v));
  bool ok = true;
  try {
    const Evaluation<ad::Var> ev = evaluate<ad::Var>(L, std::span<const ad::Var>(vars), cells);
    out.value = ev.total.value();
    tape.propagate(ev.total);
  } catch (const std::domain_error&) {
    ok = false;
  }
  out.gradient.resize(u.size());
  if (!ok) {
    out.value = std::nan("");
    std::fill(out.gradient.begin(), out.gradient.end(), std::nan(""));
    return false;
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.gradient[i] = tape.adjoint(vars[i]);
    ok = ok && std::isfinite(out.gradient[i]);
  }
  return ok && std::isfinite(out.value);
}

/// Exact gradient by one reverse sweep. Throws NumericError naming the first
/// parameter whose value or derivative is non-finite.
inline GradResult grad_log_posterior(const ParameterLayout& L, std::span<const double> u, const CellTable& cells) {
  detail::require_finite(u);
  GradResult r;
  if (try_grad_log_posterior(L, u, cells, r)) return r;
  const auto names = L.element_names();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(r.gradient[i])) {
      throw NumericError("non-finite log posterior gradient at parameter " + names[i]);
    }
  }
  throw NumericError("non-finite log posterior value");
}

/// Central-difference check of an arbitrary gradient. Relative error per
/// coordinate is |analytic - numeric| / max(1, |analytic|); returns the max.
inline double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> analytic, std::span<const double> point, double h) {
  if (!(h > 0.0)) throw InputError("finite difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

inline double finite_diff_check(const ParameterLayout& L, std::span<const double> point, const CellTable& cells,
                                double h = 1e-5) {
  const GradResult g = grad_log_posterior(L, point, cells);
  return finite_diff_check([&](std::span<const double> x) { return log_posterior(L, x, cells); }, g.gradient,
                           point, h);
}

}  // namespace hieval
