#pragma once

// No-U-Turn sampler with multinomial trajectory sampling, dual-averaging step
// size adaptation and a windowed diagonal metric, following the schedule used
// by Stan's adaptive diag_e NUTS.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hieval/density.hpp"
#include "hieval/error.hpp"
#include "hieval/gradient.hpp"
#include "hieval/layout.hpp"
#include "hieval/special.hpp"

namespace hieval {

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t warmup = 2000;
  std::size_t samples = 2000;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double init_radius = 2.0;
  double divergence_threshold = 1000.0;

  void validate() const {
    if (chains < 1) throw InputError("chains must be >= 1");
    if (warmup < 100) throw InputError("warmup must be >= 100");
    if (samples < 1) throw InputError("samples must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw InputError("target_accept must lie in (0, 1)");
    if (max_tree_depth < 1) throw InputError("max_tree_depth must be >= 1");
    if (!(init_radius >= 0.0)) throw InputError("init_radius must be >= 0");
  }
};

/// Log density with gradient. Returns false when the value or gradient is not finite.
using GradientFunction = std::function<bool(std::span<const double> x, double& lp, std::span<double> grad)>;

struct Target {
  std::size_t dim = 0;
  GradientFunction fn;
};

inline Target make_target(const ParameterLayout& L, const CellTable& cells) {
  Target t;
  t.dim = L.total_dim;
  t.fn = [&L, &cells](std::span<const double> x, double& lp, std::span<double> grad) {
    thread_local GradResult r;
    const bool ok = try_grad_log_posterior(L, x, cells, r);
    lp = r.value;
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return ok;
  };
  return t;
}

struct TransitionStats {
  bool divergent = false;
  int tree_depth = 0;
  int n_leapfrog = 0;
  double step_size = 0.0;
  double accept_stat = 0.0;
  double energy = 0.0;
  double lp = 0.0;
};

struct ChainDraws {
  std::vector<double> values;  // samples x dim, unconstrained, row-major
  std::vector<TransitionStats> stats;
  double step_size = 0.0;
  std::vector<double> inv_metric;
  std::size_t warmup_divergences = 0;
};

struct Draws {
  std::size_t chains = 0;
  std::size_t samples = 0;
  std::size_t dim = 0;
  std::vector<std::string> names;  // per unconstrained coordinate
  std::vector<ChainDraws> chain;
  std::vector<std::vector<double>> constrained;  // per chain, samples x dim (empty for generic targets)

  double at(std::size_t c, std::size_t s, std::size_t d) const { return chain[c].values[s * dim + d]; }
  double constrained_at(std::size_t c, std::size_t s, std::size_t d) const { return constrained[c][s * dim + d]; }

  /// Constrained values when available, otherwise unconstrained.
  std::vector<std::vector<double>> parameter(std::size_t d) const {
    std::vector<std::vector<double>> out(chains, std::vector<double>(samples));
    for (std::size_t c = 0; c < chains; ++c) {
      for (std::size_t s = 0; s < samples; ++s) out[c][s] = constrained.empty() ? at(c, s, d) : constrained_at(c, s, d);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Integrator

struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> grad;  // gradient of the log density at q
  double lp = 0.0;
  bool finite = true;
};

namespace detail {

inline void leapfrog_inv(PhasePoint& z, double eps, std::span<const double> inv_mass, const GradientFunction& fn) {
  const std::size_t n = z.q.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  for (std::size_t i = 0; i < n; ++i) z.q[i] += eps * inv_mass[i] * z.p[i];
  z.finite = fn(z.q, z.lp, z.grad);
  if (!z.finite) return;
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
}

inline double kinetic(const PhasePoint& z, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < z.p.size(); ++i) k += z.p[i] * z.p[i] * inv_mass[i];
  return 0.5 * k;
}

inline double hamiltonian(const PhasePoint& z, std::span<const double> inv_mass) {
  if (!z.finite || !std::isfinite(z.lp)) return std::numeric_limits<double>::infinity();
  const double h = -z.lp + kinetic(z, inv_mass);
  return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
}

}  // namespace detail

/// One half-kick / drift / half-kick step with diagonal mass matrix `mass`.
/// Returns false when the gradient at the new position is not finite.
inline bool leapfrog(std::vector<double>& position, std::vector<double>& momentum, double step,
                     std::span<const double> mass, const GradientFunction& fn) {
  if (!(step > 0.0)) throw InputError("leapfrog step must be positive");
  std::vector<double> inv(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (!(mass[i] > 0.0)) throw InputError("mass matrix entries must be positive");
    inv[i] = 1.0 / mass[i];
  }
  PhasePoint z;
  z.q = position;
  z.p = momentum;
  z.grad.assign(position.size(), 0.0);
  if (!fn(z.q, z.lp, z.grad)) return false;
  detail::leapfrog_inv(z, step, inv, fn);
  position = std::move(z.q);
  momentum = std::move(z.p);
  return z.finite;
}

// ---------------------------------------------------------------------------
// Transition

class Nuts {
 public:
  Nuts(const GradientFunction& fn, std::size_t dim, int max_depth, double divergence_threshold)
      : fn_(fn), dim_(dim), max_depth_(max_depth), threshold_(divergence_threshold) {}

  /// Advances `z` by one NUTS transition; `z` keeps its position when the
  /// whole trajectory is rejected.
  TransitionStats transition(PhasePoint& z, double eps, std::span<const double> inv_mass, std::mt19937_64& rng) {
    eps_ = eps;
    inv_mass_ = inv_mass;
    rng_ = &rng;
    std::normal_distribution<double> normal(0.0, 1.0);
    z.p.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = normal(rng) / std::sqrt(inv_mass[i]);

    const double H0 = detail::hamiltonian(z, inv_mass);
    PhasePoint z_fwd = z, z_bwd = z, z_sample = z, z_propose = z;

    std::vector<double> p_sharp_fwd_bwd = sharp(z.p), p_sharp_fwd_fwd = p_sharp_fwd_bwd;
    std::vector<double> p_sharp_bwd_fwd = p_sharp_fwd_bwd, p_sharp_bwd_bwd = p_sharp_fwd_bwd;
    std::vector<double> p_fwd_bwd = z.p, p_fwd_fwd = z.p, p_bwd_fwd = z.p, p_bwd_bwd = z.p;
    std::vector<double> rho = z.p;

    double log_sum_weight = 0.0;
    int depth = 0;
    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < max_depth_) {
      std::vector<double> rho_fwd(dim_, 0.0), rho_bwd(dim_, 0.0);
      bool valid = false;
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      if (unif(rng) > 0.5) {
        rho_bwd = rho;
        p_bwd_fwd = p_fwd_bwd;
        p_sharp_bwd_fwd = p_sharp_fwd_bwd;
        PhasePoint& cur = z_fwd;
        valid = build_tree(depth, cur, z_propose, p_sharp_fwd_bwd, p_sharp_fwd_fwd, rho_fwd, p_fwd_bwd, p_fwd_fwd, H0,
                           1.0, lsw_subtree);
      } else {
        rho_fwd = rho;
        p_fwd_bwd = p_bwd_fwd;
        p_sharp_fwd_bwd = p_sharp_bwd_fwd;
        PhasePoint& cur = z_bwd;
        valid = build_tree(depth, cur, z_propose, p_sharp_bwd_fwd, p_sharp_bwd_bwd, rho_bwd, p_bwd_fwd, p_bwd_bwd, H0,
                           -1.0, lsw_subtree);
      }
      if (!valid) break;
      ++depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = math::log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < dim_; ++i) rho[i] = rho_bwd[i] + rho_fwd[i];
      bool persist = criterion(p_sharp_bwd_bwd, p_sharp_fwd_fwd, rho);
      std::vector<double> ext(dim_);
      for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_bwd[i] + p_fwd_bwd[i];
      persist = persist && criterion(p_sharp_bwd_bwd, p_sharp_fwd_bwd, ext);
      for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_fwd[i] + p_bwd_fwd[i];
      persist = persist && criterion(p_sharp_bwd_fwd, p_sharp_fwd_fwd, ext);
      if (!persist) break;
    }

    TransitionStats st;
    st.divergent = divergent_;
    st.tree_depth = depth;
    st.n_leapfrog = n_leapfrog_;
    st.step_size = eps;
    st.accept_stat = n_leapfrog_ > 0 ? sum_metro_prob_ / static_cast<double>(n_leapfrog_) : 0.0;
    z = std::move(z_sample);
    st.energy = detail::hamiltonian(z, inv_mass);
    st.lp = z.lp;
    return st;
  }

 private:
  std::vector<double> sharp(const std::vector<double>& p) const {
    std::vector<double> out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = inv_mass_[i] * p[i];
    return out;
  }

  static bool criterion(const std::vector<double>& p_sharp_minus, const std::vector<double>& p_sharp_plus,
                        const std::vector<double>& rho) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      a += p_sharp_plus[i] * rho[i];
      b += p_sharp_minus[i] * rho[i];
    }
    return a > 0.0 && b > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, std::vector<double>& p_sharp_beg,
                  std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double H0, double sign, double& log_sum_weight) {
    if (depth == 0) {
      detail::leapfrog_inv(z, sign * eps_, inv_mass_, fn_);
      ++n_leapfrog_;
      const double h = detail::hamiltonian(z, inv_mass_);
      if (h - H0 > threshold_) divergent_ = true;
      log_sum_weight = math::log_sum_exp(log_sum_weight, H0 - h);
      sum_metro_prob_ += H0 - h > 0.0 ? 1.0 : std::exp(H0 - h);
      z_propose = z;
      p_sharp_beg = sharp(z.p);
      p_sharp_end = p_sharp_beg;
      for (std::size_t i = 0; i < dim_; ++i) rho[i] += z.p[i];
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    std::vector<double> p_sharp_left_end(dim_), p_left_end(dim_), rho_left(dim_, 0.0);
    double lsw_left = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_left_end, rho_left, p_beg, p_left_end, H0, sign,
                    lsw_left)) {
      return false;
    }

    PhasePoint z_propose_right = z;
    std::vector<double> p_sharp_right_beg(dim_), p_right_beg(dim_), rho_right(dim_, 0.0);
    double lsw_right = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z, z_propose_right, p_sharp_right_beg, p_sharp_end, rho_right, p_right_beg, p_end, H0,
                    sign, lsw_right)) {
      return false;
    }

    const double lsw_subtree = math::log_sum_exp(lsw_left, lsw_right);
    log_sum_weight = math::log_sum_exp(log_sum_weight, lsw_subtree);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lsw_right > lsw_subtree) {
      z_propose = z_propose_right;
    } else if (unif(*rng_) < std::exp(lsw_right - lsw_subtree)) {
      z_propose = z_propose_right;
    }

    std::vector<double> rho_subtree(dim_);
    for (std::size_t i = 0; i < dim_; ++i) rho_subtree[i] = rho_left[i] + rho_right[i];
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    std::vector<double> ext(dim_);
    for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_left[i] + p_right_beg[i];
    persist = persist && criterion(p_sharp_beg, p_sharp_right_beg, ext);
    for (std::size_t i = 0; i < dim_; ++i) ext[i] = rho_right[i] + p_left_end[i];
    persist = persist && criterion(p_sharp_left_end, p_sharp_end, ext);
    for (std::size_t i = 0; i < dim_; ++i) rho[i] += rho_subtree[i];
    return persist;
  }

  const GradientFunction& fn_;
  std::size_t dim_;
  int max_depth_;
  double threshold_;
  double eps_ = 1.0;
  std::span<const double> inv_mass_;
  std::mt19937_64* rng_ = nullptr;
  int n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

/// Single NUTS transition with a diagonal mass matrix `mass` (not its inverse).
inline TransitionStats nuts_transition(PhasePoint& state, double step, std::span<const double> mass,
                                       const GradientFunction& fn, std::mt19937_64& rng, int max_tree_depth = 10) {
  std::vector<double> inv(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) inv[i] = 1.0 / mass[i];
  if (state.grad.size() != state.q.size()) {
    state.grad.assign(state.q.size(), 0.0);
    state.finite = fn(state.q, state.lp, state.grad);
  }
  Nuts nuts(fn, state.q.size(), max_tree_depth, 1000.0);
  return nuts.transition(state, step, inv, rng);
}

// ---------------------------------------------------------------------------
// Adaptation

class StepSizeAdaptation {
 public:
  explicit StepSizeAdaptation(double delta) : delta_(delta) {}

  void restart(double eps) {
    mu_ = std::log(10.0 * eps);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }

  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

/// Expanding-window schedule for the diagonal metric: an initial fast
/// buffer, doubling slow windows, and a terminal fast buffer.
class MetricAdaptation {
 public:
  MetricAdaptation(std::size_t dim, std::size_t warmup) : dim_(dim), warmup_(warmup), mean_(dim), m2_(dim) {
    init_buffer_ = 75;
    term_buffer_ = 50;
    base_window_ = 25;
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
      term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup));
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + base_window_ - 1;
  }

  /// Feeds one warmup position; returns true when `inv_metric` was updated.
  bool learn(std::vector<double>& inv_metric, const std::vector<double>& q) {
    if (in_window()) add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(count_);
      for (std::size_t i = 0; i < dim_; ++i) {
        const double var = count_ > 1 ? m2_[i] / (n - 1.0) : 1.0;
        inv_metric[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
      }
      restart();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }

  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  void add(const std::vector<double>& q) {
    ++count_;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double d = q[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (q[i] - mean_[i]);
    }
  }

  void restart() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

  std::size_t dim_, warmup_;
  std::size_t init_buffer_, term_buffer_, base_window_;
  std::size_t window_size_, next_window_;
  std::size_t counter_ = 0;
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

namespace detail {

/// Doubles or halves the step until the acceptance of one leapfrog step
/// crosses 0.8.
inline double init_stepsize(const PhasePoint& start, double eps, std::span<const double> inv_mass,
                            const GradientFunction& fn, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = start.q.size();
  auto trial = [&](double e) {
    PhasePoint z = start;
    z.p.resize(n);
    for (std::size_t i = 0; i < n; ++i) z.p[i] = normal(rng) / std::sqrt(inv_mass[i]);
    const double H0 = hamiltonian(z, inv_mass);
    leapfrog_inv(z, e, inv_mass, fn);
    return H0 - hamiltonian(z, inv_mass);
  };
  const double log_target = std::log(0.8);
  const double first = trial(eps);
  const int direction = first > log_target ? 1 : -1;
  for (int iter = 0; iter < 200; ++iter) {
    const double delta_h = trial(eps);
    if (direction == 1 && !(delta_h > log_target)) break;
    if (direction == -1 && !(delta_h < log_target)) break;
    eps = direction == 1 ? 2.0 * eps : 0.5 * eps;
    if (eps > 1e7) throw SamplerError("step size search diverged to infinity; the posterior may be improper");
    if (eps == 0.0) throw SamplerError("step size search collapsed to zero; check the model for non-finite regions");
  }
  return eps;
}

}  // namespace detail

using ProgressHook = std::function<void(std::size_t chain, std::size_t iteration, std::size_t total)>;

/// Runs one chain: warmup with adaptation, then `samples` frozen-step draws.
inline ChainDraws run_chain(const Target& target, const SamplerConfig& config, std::size_t chain_index,
                            const ProgressHook& progress = {}) {
  const std::size_t dim = target.dim;
  std::mt19937_64 rng(config.seed + chain_index);
  std::uniform_real_distribution<double> init(-config.init_radius, config.init_radius);

  PhasePoint z;
  z.q.resize(dim);
  z.grad.resize(dim);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    for (double& v : z.q) v = init(rng);
    ok = target.fn(z.q, z.lp, z.grad);
  }
  if (!ok) throw SamplerError("could not find a finite initial point in 100 attempts");
  z.finite = true;

  std::vector<double> inv_metric(dim, 1.0);
  Nuts nuts(target.fn, dim, config.max_tree_depth, config.divergence_threshold);
  StepSizeAdaptation step_adapt(config.target_accept);
  MetricAdaptation metric_adapt(dim, config.warmup);

  double eps = dim == 0 ? 1.0 : detail::init_stepsize(z, 1.0, inv_metric, target.fn, rng);
  step_adapt.restart(eps);

  ChainDraws out;
  const std::size_t total = config.warmup + config.samples;
  for (std::size_t it = 0; it < config.warmup; ++it) {
    const TransitionStats st = nuts.transition(z, eps, inv_metric, rng);
    if (st.divergent) ++out.warmup_divergences;
    eps = step_adapt.learn(st.accept_stat);
    if (metric_adapt.learn(inv_metric, z.q)) {
      eps = detail::init_stepsize(z, eps, inv_metric, target.fn, rng);
      step_adapt.restart(eps);
    }
    if (progress) progress(chain_index, it + 1, total);
  }
  if (out.warmup_divergences == config.warmup) {
    throw SamplerError("every warmup transition diverged in chain " + std::to_string(chain_index) +
                       "; try a higher target_accept (smaller steps) or a non-centered parameterization");
  }
  eps = step_adapt.final_step();

  out.values.resize(config.samples * dim);
  out.stats.resize(config.samples);
  for (std::size_t s = 0; s < config.samples; ++s) {
    out.stats[s] = nuts.transition(z, eps, inv_metric, rng);
    std::copy(z.q.begin(), z.q.end(), out.values.begin() + static_cast<std::ptrdiff_t>(s * dim));
    if (progress) progress(chain_index, config.warmup + s + 1, total);
  }
  out.step_size = eps;
  out.inv_metric = inv_metric;
  return out;
}

/// Worker count: HIEVAL_THREADS if set (>= 1), else hardware concurrency.
inline std::size_t thread_limit(std::size_t chains) {
  std::size_t limit = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HIEVAL_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) limit = static_cast<std::size_t>(v);
  }
  return std::min(limit, chains);
}

/// Runs all chains (in parallel up to thread_limit). Chain c uses seed + c,
/// so the result does not depend on the thread count.
inline Draws run_chains(const Target& target, const SamplerConfig& config, const ProgressHook& progress = {}) {
  config.validate();
  Draws draws;
  draws.chains = config.chains;
  draws.samples = config.samples;
  draws.dim = target.dim;
  draws.chain.resize(config.chains);
  for (std::size_t i = 0; i < target.dim; ++i) draws.names.push_back("x[" + std::to_string(i) + "]");

  std::vector<std::exception_ptr> errors(config.chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < config.chains; c = next++) {
      try {
        draws.chain[c] = run_chain(target, config, c, progress);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = thread_limit(config.chains);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return draws;
}

/// Samples a compiled model; also fills the constrained-scale values.
inline Draws run_chains(const ParameterLayout& L, const CellTable& cells, const SamplerConfig& config,
                        const ProgressHook& progress = {}) {
  Draws draws = run_chains(make_target(L, cells), config, progress);
  draws.names = L.element_names();
  draws.constrained.resize(draws.chains);
  for (std::size_t c = 0; c < draws.chains; ++c) {
    auto& out = draws.constrained[c];
    out.resize(draws.samples * draws.dim);
    for (std::size_t s = 0; s < draws.samples; ++s) {
      for (const LayoutEntry& e : L.entries) {
        for (std::size_t i = 0; i < e.size; ++i) {
          const double u = draws.at(c, s, e.offset + i);
          out[s * draws.dim + e.offset + i] = e.transform == Transform::log ? std::exp(u) : u;
        }
      }
    }
  }
  return draws;
}

}  // namespace hieval
