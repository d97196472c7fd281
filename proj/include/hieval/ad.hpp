#pragma once

// Reverse-mode automatic differentiation on a dynamically recorded tape.
//
// A Var is either a constant (no tape) or a handle to a node on a Tape. Each
// node stores the local partials with respect to its operands; one reverse
// sweep from the output accumulates adjoints for every input. Primitives
// compute their values through the same hieval::math kernels as the plain
// double path, so taped and untaped evaluations produce identical values.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "hieval/special.hpp"

namespace hieval::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: constants convert implicitly

  double value() const { return value_; }
  bool is_constant() const { return tape_ == nullptr; }
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(double value, Tape* tape, std::uint32_t index) : value_(value), tape_(tape), index_(index) {}

  double value_ = 0.0;
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

struct Operand {
  const Var& var;
  double partial;
};

class Tape {
 public:
  void clear() {
    nodes_.clear();
    parents_.clear();
    partials_.clear();
    adjoints_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

  /// Registers an independent input.
  Var variable(double value) {
    nodes_.push_back({static_cast<std::uint32_t>(parents_.size()), 0});
    return Var(value, this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  /// Records value = f(operands) with the given local partials. Constant
  /// operands are dropped; if every operand is constant the result is too.
  Var record(double value, std::initializer_list<Operand> operands) {
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (const Operand& op : operands) {
      if (op.var.is_constant()) continue;
      parents_.push_back(op.var.index());
      partials_.push_back(op.partial);
    }
    const auto count = static_cast<std::uint32_t>(parents_.size()) - begin;
    if (count == 0) return Var(value);
    nodes_.push_back({begin, count});
    return Var(value, this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  /// value = Σ coef_i · x_i recorded as a single node.
  Var record_linear(double value, std::span<const Var> xs, std::span<const double> coefs) {
    const auto begin = static_cast<std::uint32_t>(parents_.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].is_constant()) continue;
      parents_.push_back(xs[i].index());
      partials_.push_back(coefs[i]);
    }
    const auto count = static_cast<std::uint32_t>(parents_.size()) - begin;
    if (count == 0) return Var(value);
    nodes_.push_back({begin, count});
    return Var(value, this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  /// Reverse sweep seeded at `root`. Afterwards adjoint(x) holds d root / d x.
  void propagate(const Var& root) {
    adjoints_.assign(nodes_.size(), 0.0);
    if (root.is_constant()) return;
    adjoints_[root.index()] = 1.0;
    for (std::size_t i = root.index() + 1; i-- > 0;) {
      const double a = adjoints_[i];
      if (a == 0.0) continue;
      const Node& node = nodes_[i];
      for (std::uint32_t e = node.begin; e < node.begin + node.count; ++e) {
        adjoints_[parents_[e]] += a * partials_[e];
      }
    }
  }

  double adjoint(const Var& v) const { return v.is_constant() ? 0.0 : adjoints_[v.index()]; }

 private:
  struct Node {
    std::uint32_t begin;
    std::uint32_t count;
  };
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  std::vector<double> adjoints_;
};

namespace detail {
inline Tape* tape_of(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars) {
    if (!v->is_constant()) return v->tape();
  }
  return nullptr;
}
}  // namespace detail

inline double value_of(const Var& v) { return v.value(); }

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = detail::tape_of({&a, &b});
  const double v = a.value() + b.value();
  return t ? t->record(v, {{a, 1.0}, {b, 1.0}}) : Var(v);
}

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = detail::tape_of({&a, &b});
  const double v = a.value() - b.value();
  return t ? t->record(v, {{a, 1.0}, {b, -1.0}}) : Var(v);
}

inline Var operator-(const Var& a) {
  const double v = -a.value();
  return a.is_constant() ? Var(v) : a.tape()->record(v, {{a, -1.0}});
}

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = detail::tape_of({&a, &b});
  const double v = a.value() * b.value();
  return t ? t->record(v, {{a, b.value()}, {b, a.value()}}) : Var(v);
}

inline Var operator/(const Var& a, const Var& b) {
  Tape* t = detail::tape_of({&a, &b});
  const double v = a.value() / b.value();
  return t ? t->record(v, {{a, 1.0 / b.value()}, {b, -v / b.value()}}) : Var(v);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }

inline Var exp(const Var& x) {
  const double v = std::exp(x.value());
  return x.is_constant() ? Var(v) : x.tape()->record(v, {{x, v}});
}

inline Var log(const Var& x) {
  const double v = std::log(x.value());
  return x.is_constant() ? Var(v) : x.tape()->record(v, {{x, 1.0 / x.value()}});
}

inline Var inv_logit(const Var& x) {
  const double p = math::inv_logit(x.value());
  return x.is_constant() ? Var(p) : x.tape()->record(p, {{x, p * math::inv_logit(-x.value())}});
}

inline Var log1p_exp(const Var& x) {
  const double v = math::log1p_exp(x.value());
  return x.is_constant() ? Var(v) : x.tape()->record(v, {{x, math::inv_logit(x.value())}});
}

/// Sequential sum recorded as one node.
inline Var sum(std::span<const Var> xs) {
  double v = 0.0;
  for (const Var& x : xs) v += x.value();
  Tape* t = nullptr;
  for (const Var& x : xs) {
    if (!x.is_constant()) {
      t = x.tape();
      break;
    }
  }
  if (!t) return Var(v);
  thread_local std::vector<double> ones;
  ones.assign(xs.size(), 1.0);
  return t->record_linear(v, xs, ones);
}

/// base + Σ coef_i · x_i, evaluated left to right.
inline Var linear(double base, std::span<const Var> xs, std::span<const double> coefs) {
  double v = base;
  for (std::size_t i = 0; i < xs.size(); ++i) v += coefs[i] * xs[i].value();
  Tape* t = nullptr;
  for (const Var& x : xs) {
    if (!x.is_constant()) {
      t = x.tape();
      break;
    }
  }
  return t ? t->record_linear(v, xs, coefs) : Var(v);
}

/// mean + scale · z, the non-centered composition.
inline Var affine(const Var& mean, const Var& scale, const Var& z) {
  Tape* t = detail::tape_of({&mean, &scale, &z});
  const double v = mean.value() + scale.value() * z.value();
  return t ? t->record(v, {{mean, 1.0}, {scale, z.value()}, {z, scale.value()}}) : Var(v);
}

inline Var normal_lpdf(const Var& x, const Var& mu, const Var& sd) {
  Tape* t = detail::tape_of({&x, &mu, &sd});
  const double v = math::normal_lpdf(x.value(), mu.value(), sd.value());
  if (!t) return Var(v);
  const double s = sd.value();
  const double r = (x.value() - mu.value()) / s;
  return t->record(v, {{x, -r / s}, {mu, r / s}, {sd, (r * r - 1.0) / s}});
}

inline Var half_normal_lpdf(const Var& x, double scale) {
  const double v = math::half_normal_lpdf(x.value(), scale);
  return x.is_constant() ? Var(v) : x.tape()->record(v, {{x, -x.value() / (scale * scale)}});
}

inline Var gamma_lpdf(const Var& x, const Var& log_x, double shape, double rate) {
  Tape* t = detail::tape_of({&x, &log_x});
  const double v = math::gamma_lpdf(x.value(), log_x.value(), shape, rate);
  return t ? t->record(v, {{x, -rate}, {log_x, shape - 1.0}}) : Var(v);
}

inline Var log_beta(const Var& a, const Var& b) {
  Tape* t = detail::tape_of({&a, &b});
  const double v = math::log_beta(a.value(), b.value());
  if (!t) return Var(v);
  const math::LogBetaGrad g = math::log_beta_grad(a.value(), b.value());
  return t->record(v, {{a, g.d_a}, {b, g.d_b}});
}

inline Var binomial_logit_lpmf(std::int64_t k, std::int64_t n, const Var& eta, double log_choose_nk) {
  const double v = math::binomial_logit_lpmf(k, n, eta.value(), log_choose_nk);
  return eta.is_constant() ? Var(v)
                           : eta.tape()->record(v, {{eta, math::binomial_logit_dlpmf(k, n, eta.value())}});
}

inline Var beta_binomial_logit_lpmf(std::int64_t k, std::int64_t n, const Var& eta, const Var& phi,
                                    double log_choose_nk) {
  const math::BetaBinomialLogit r = math::beta_binomial_logit(k, n, eta.value(), phi.value(), log_choose_nk);
  Tape* t = detail::tape_of({&eta, &phi});
  return t ? t->record(r.value, {{eta, r.d_eta}, {phi, r.d_phi}}) : Var(r.value);
}

}  // namespace hieval::ad
