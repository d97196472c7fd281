#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "hieval/error.hpp"
#include "hieval/special.hpp"

namespace hieval {

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double mass = 0.95;

  double width() const { return high - low; }
  bool contains(double x) const { return low <= x && x <= high; }
};

enum class Verdict { equivalent, inconclusive, different };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::equivalent: return "equivalent";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::different: return "different";
  }
  return "";
}

struct OverlapDecision {
  Verdict verdict = Verdict::inconclusive;
  double overlap_fraction = 0.0;
};

namespace detail {
inline void check_mass(double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw InputError("interval mass must lie in (0, 1)");
}
}  // namespace detail

/// Narrowest window holding ceil(mass * N) sorted samples; ties go to the lowest start.
inline Interval hpdi(std::span<const double> samples, double mass = 0.95) {
  detail::check_mass(mass);
  if (samples.size() < 10) throw InputError("hpdi needs at least 10 samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const auto w = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  std::size_t best = 0;
  double best_width = x[w - 1] - x[0];
  for (std::size_t i = 1; i + w <= n; ++i) {
    const double width = x[i + w - 1] - x[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {x[best], x[best + w - 1], mass};
}

/// Linear-interpolation quantile of sorted data (position (N-1)q).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Equal-tailed interval between the (1-mass)/2 and (1+mass)/2 quantiles.
inline Interval quantile_interval(std::span<const double> samples, double mass = 0.95) {
  detail::check_mass(mass);
  if (samples.size() < 2) throw InputError("quantile interval needs at least 2 samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  return {quantile_sorted(x, (1.0 - mass) / 2.0), quantile_sorted(x, (1.0 + mass) / 2.0), mass};
}

/// |a ∩ b| / width of the narrower interval. A zero-width interval counts
/// as fully overlapping when it lies inside the other one.
inline double overlap_fraction(const Interval& a, const Interval& b) {
  if (std::abs(a.mass - b.mass) > 1e-12) throw InputError("cannot compare intervals of different mass");
  const double inter = std::max(0.0, std::min(a.high, b.high) - std::max(a.low, b.low));
  const Interval& narrow = a.width() <= b.width() ? a : b;
  const Interval& wide = a.width() <= b.width() ? b : a;
  if (narrow.width() == 0.0) return wide.contains(narrow.low) ? 1.0 : 0.0;
  return std::min(1.0, inter / narrow.width());
}

/// Three-way rule: no overlap is `different`, overlap at or above the
/// threshold is `equivalent`, anything in between is `inconclusive`.
inline OverlapDecision decide(double fraction, double equivalence_threshold = 0.99) {
  if (fraction <= 0.0) return {Verdict::different, 0.0};
  if (fraction >= equivalence_threshold) return {Verdict::equivalent, fraction};
  return {Verdict::inconclusive, fraction};
}

inline OverlapDecision compare_intervals(const Interval& a, const Interval& b, double equivalence_threshold = 0.99) {
  return decide(overlap_fraction(a, b), equivalence_threshold);
}

inline std::vector<double> to_probability_scale(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  std::transform(logits.begin(), logits.end(), out.begin(), [](double x) { return math::inv_logit(x); });
  return out;
}

/// Fraction of samples strictly above `threshold`.
inline double threshold_exceedance(std::span<const double> samples, double threshold) {
  if (samples.empty()) return 0.0;
  const auto above = std::count_if(samples.begin(), samples.end(), [&](double x) { return x > threshold; });
  return static_cast<double>(above) / static_cast<double>(samples.size());
}

/// Diagnostic only. Builds a histogram highest-density region of the given
/// mass and reports true when it splits into two or more separate pieces,
/// each holding a non-trivial share of the draws. A single HPDI interval
/// straddles the gap in that case.
inline bool hpdi_looks_multimodal(std::span<const double> samples, double mass = 0.95) {
  if (samples.size() < 100) return false;
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double lo = quantile_sorted(x, 0.0025), hi = quantile_sorted(x, 0.9975);
  if (!(hi > lo)) return false;
  const std::size_t bins = std::clamp<std::size_t>(static_cast<std::size_t>(std::sqrt(x.size()) / 2.0), 20, 100);
  std::vector<std::size_t> count(bins, 0);
  for (double v : x) {
    if (v < lo || v > hi) continue;
    const auto b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins)));
    ++count[b];
  }
  std::vector<std::size_t> order(bins);
  for (std::size_t i = 0; i < bins; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return count[a] > count[b]; });
  std::vector<bool> in_region(bins, false);
  const double target = mass * static_cast<double>(x.size());
  double taken = 0.0;
  for (std::size_t b : order) {
    if (taken >= target) break;
    in_region[b] = true;
    taken += static_cast<double>(count[b]);
  }
  // Pieces separated by a single excluded bin are treated as one, which
  // absorbs histogram noise at the region boundary.
  std::size_t pieces = 0, gap = 0;
  double piece_mass = 0.0;
  bool open = false;
  auto close = [&] {
    if (open && piece_mass >= 0.05 * static_cast<double>(x.size())) ++pieces;
    open = false;
    piece_mass = 0.0;
  };
  for (std::size_t b = 0; b < bins; ++b) {
    if (in_region[b]) {
      open = true;
      gap = 0;
      piece_mass += static_cast<double>(count[b]);
    } else if (open && ++gap >= 2) {
      close();
    }
  }
  close();
  return pieces >= 2;
}

}  // namespace hieval
