#pragma once

// Synthetic evaluation logs with known latent effects, for recovery checks.
//
// Generator specs are JSON objects with a `kind`:
//   cells      explicit groups, each with a logit (or probability) and a trial count
//   reasoning  tasks x models x reasoning levels, Beta-distributed per-cell rates
//   bimodal    per-task rates drawn from Beta(a, b) with a few repeats each

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieval/dataset.hpp"
#include "hieval/error.hpp"
#include "hieval/special.hpp"

namespace hieval::sim {

struct Simulated {
  std::vector<EvalRecord> records;
  nlohmann::json truth;
};

namespace detail {

inline double beta_draw(double a, double b, std::mt19937_64& rng) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  if (x + y <= 0.0) return std::bernoulli_distribution(a / (a + b))(rng) ? 1.0 : 0.0;
  return x / (x + y);
}

inline const nlohmann::json& need(const nlohmann::json& j, const char* key, const char* kind) {
  if (!j.contains(key)) throw InputError(std::string(kind) + " generator needs '" + key + "'");
  return j.at(key);
}

inline double number(const nlohmann::json& j, const char* key, const char* kind) {
  const auto& v = need(j, key, kind);
  if (!v.is_number()) throw InputError(std::string(kind) + " generator: '" + key + "' must be a number");
  return v.get<double>();
}

inline int count(const nlohmann::json& j, const char* key, const char* kind, int dflt = -1) {
  if (!j.contains(key)) {
    if (dflt >= 0) return dflt;
    throw InputError(std::string(kind) + " generator needs '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1) {
    throw InputError(std::string(kind) + " generator: '" + key + "' must be a positive integer");
  }
  return v.get<int>();
}

inline void set_label(EvalRecord& r, const std::string& factor, const std::string& label) {
  if (factor == "model") r.model = label;
  else if (factor == "domain") r.domain = label;
  else if (factor == "subdomain") r.subdomain = label;
  else if (factor == "task") r.task = label;
  else if (factor == "difficulty") r.difficulty = label;
  else r.extra.emplace_back(factor, label);
}

}  // namespace detail

/// {"kind":"cells","cells":[{"labels":{"model":"m","domain":"d1"},"logit":-0.12,"n":1257}, ...]}
/// `p` may replace `logit`. Each trial becomes one record with its own task id.
inline Simulated simulate_cells(const nlohmann::json& spec, std::uint64_t seed) {
  const char* kind = "cells";
  const auto& cells = detail::need(spec, "cells", kind);
  if (!cells.is_array() || cells.empty()) throw InputError("cells generator: 'cells' must be a non-empty array");
  std::mt19937_64 rng(seed);
  Simulated out;
  out.truth = {{"kind", "cells"}, {"seed", seed}, {"cells", nlohmann::json::array()}};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    double p;
    if (c.contains("logit")) {
      p = math::inv_logit(detail::number(c, "logit", kind));
    } else {
      p = detail::number(c, "p", kind);
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("cells generator: p must lie in [0, 1]");
    }
    const int n = detail::count(c, "n", kind);
    EvalRecord proto;
    proto.model = "model";
    nlohmann::json labels = nlohmann::json::object();
    if (c.contains("labels")) {
      if (!c.at("labels").is_object()) throw InputError("cells generator: 'labels' must be an object");
      for (const auto& [f, v] : c.at("labels").items()) {
        if (!v.is_string()) throw InputError("cells generator: label of '" + f + "' must be a string");
        detail::set_label(proto, f, v.get<std::string>());
        labels[f] = v;
      }
    }
    std::bernoulli_distribution trial(p);
    for (int t = 0; t < n; ++t) {
      EvalRecord r = proto;
      r.task = "c" + std::to_string(i) + "-t" + std::to_string(t + 1);
      r.score = trial(rng) ? 1 : 0;
      out.records.push_back(std::move(r));
    }
    out.truth["cells"].push_back({{"labels", labels}, {"p", p}, {"logit", math::logit(p)}, {"n", n}});
  }
  return out;
}

/// {"kind":"bimodal","tasks":200,"repeats":10,"alpha":0.2,"beta":0.2,"model":"m"}
inline Simulated simulate_bimodal(const nlohmann::json& spec, std::uint64_t seed) {
  const char* kind = "bimodal";
  const int tasks = detail::count(spec, "tasks", kind, 200);
  const int repeats = detail::count(spec, "repeats", kind, 10);
  const double a = spec.contains("alpha") ? detail::number(spec, "alpha", kind) : 0.2;
  const double b = spec.contains("beta") ? detail::number(spec, "beta", kind) : 0.2;
  if (!(a > 0.0 && b > 0.0)) throw InputError("bimodal generator: alpha and beta must be positive");
  const std::string model = spec.value("model", "model");
  std::mt19937_64 rng(seed);
  Simulated out;
  out.truth = {{"kind", "bimodal"}, {"seed", seed}, {"alpha", a}, {"beta", b}, {"task_p", nlohmann::json::object()}};
  for (int t = 0; t < tasks; ++t) {
    const double p = detail::beta_draw(a, b, rng);
    const std::string task = "task" + std::to_string(t + 1);
    out.truth["task_p"][task] = p;
    std::bernoulli_distribution trial(p);
    for (int r = 0; r < repeats; ++r) {
      EvalRecord rec;
      rec.model = model;
      rec.task = task;
      rec.repeat = r + 1;
      rec.score = trial(rng) ? 1 : 0;
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

/// Reasoning-benchmark shape. Per (model, task, reasoning level):
///   logit p = model + difficulty + gamma[model, difficulty] * level + task
///   theta ~ Beta(p phi, (1 - p) phi), then `repeats` Bernoulli(theta) scores.
///
/// {"kind":"reasoning","tasks_per_difficulty":[53,86,26],"difficulty_effects":[0.6,0,-0.9],
///  "task_sd":1.0,"phi":2.0,"repeats":10,
///  "models":[{"name":"o1","effect":0.3,"levels":["low","intermediate","high"],"gamma":[0.7,0.7,0.3]}, ...]}
/// A model without `levels` runs at reasoning level none only.
inline Simulated simulate_reasoning(const nlohmann::json& spec, std::uint64_t seed) {
  const char* kind = "reasoning";
  std::vector<int> per_diff = {53, 86, 26};
  if (spec.contains("tasks_per_difficulty")) per_diff = spec.at("tasks_per_difficulty").get<std::vector<int>>();
  std::vector<double> diff_eff(per_diff.size(), 0.0);
  if (spec.contains("difficulty_effects")) diff_eff = spec.at("difficulty_effects").get<std::vector<double>>();
  if (per_diff.empty() || diff_eff.size() != per_diff.size()) {
    throw InputError("reasoning generator: difficulty_effects must match tasks_per_difficulty");
  }
  for (int n : per_diff) {
    if (n < 1) throw InputError("reasoning generator: every difficulty needs at least one task");
  }
  const double task_sd = spec.contains("task_sd") ? detail::number(spec, "task_sd", kind) : 1.0;
  const double phi = spec.contains("phi") ? detail::number(spec, "phi", kind) : 2.0;
  if (!(phi > 0.0) || !(task_sd >= 0.0)) throw InputError("reasoning generator: phi must be > 0 and task_sd >= 0");
  const int repeats = detail::count(spec, "repeats", kind, 10);
  const auto& models = detail::need(spec, "models", kind);
  if (!models.is_array() || models.empty()) throw InputError("reasoning generator: 'models' must be non-empty");

  static const char* diff_names[] = {"easy", "mid", "hard"};
  auto diff_label = [&](std::size_t d) {
    return d < 3 && per_diff.size() == 3 ? std::string(diff_names[d]) : "level" + std::to_string(d + 1);
  };

  std::mt19937_64 rng(seed);
  Simulated out;
  out.truth = {{"kind", "reasoning"}, {"seed", seed},          {"phi", phi},
               {"task_sd", task_sd},  {"repeats", repeats},    {"difficulty", nlohmann::json::object()},
               {"models", nlohmann::json::object()},           {"task", nlohmann::json::object()}};

  struct TaskInfo {
    std::string name;
    std::size_t difficulty;
    double effect;
  };
  std::vector<TaskInfo> tasks;
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t d = 0; d < per_diff.size(); ++d) {
    out.truth["difficulty"][diff_label(d)] = diff_eff[d];
    for (int t = 0; t < per_diff[d]; ++t) {
      TaskInfo ti{"task" + std::to_string(tasks.size() + 1), d, task_sd * z(rng)};
      out.truth["task"][ti.name] = ti.effect;
      tasks.push_back(std::move(ti));
    }
  }

  for (const auto& m : models) {
    const std::string name = detail::need(m, "name", kind).get<std::string>();
    const double effect = m.contains("effect") ? detail::number(m, "effect", kind) : 0.0;
    std::vector<ReasoningEffort> levels = {ReasoningEffort::none};
    if (m.contains("levels")) {
      levels.clear();
      for (const auto& l : m.at("levels")) {
        const auto r = parse_reasoning_effort(l.get<std::string>());
        if (!r) throw InputError("reasoning generator: unknown reasoning level '" + l.get<std::string>() + "'");
        levels.push_back(*r);
      }
    }
    std::vector<double> gamma(per_diff.size(), 0.0);
    if (m.contains("gamma")) {
      gamma = m.at("gamma").get<std::vector<double>>();
      if (gamma.size() != per_diff.size()) throw InputError("reasoning generator: gamma needs one value per difficulty");
    }
    nlohmann::json mt = {{"effect", effect}, {"gamma", nlohmann::json::object()}};
    for (std::size_t d = 0; d < per_diff.size(); ++d) mt["gamma"][diff_label(d)] = gamma[d];
    out.truth["models"][name] = mt;

    for (const TaskInfo& t : tasks) {
      for (ReasoningEffort level : levels) {
        const double x = static_cast<double>(static_cast<int>(level));
        const double p = math::inv_logit(effect + diff_eff[t.difficulty] + gamma[t.difficulty] * x + t.effect);
        const double theta = detail::beta_draw(std::max(p * phi, 1e-12), std::max((1.0 - p) * phi, 1e-12), rng);
        std::bernoulli_distribution trial(theta);
        for (int r = 0; r < repeats; ++r) {
          EvalRecord rec;
          rec.model = name;
          rec.task = t.name;
          rec.difficulty = diff_label(t.difficulty);
          rec.reasoning_effort = level;
          rec.repeat = r + 1;
          rec.score = trial(rng) ? 1 : 0;
          out.records.push_back(std::move(rec));
        }
      }
    }
  }
  return out;
}

inline Simulated simulate(const nlohmann::json& spec, std::uint64_t seed) {
  if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string()) {
    throw InputError("generator spec needs a string 'kind' (cells, reasoning or bimodal)");
  }
  const std::string kind = spec.at("kind").get<std::string>();
  try {
    if (kind == "cells") return simulate_cells(spec, seed);
    if (kind == "bimodal") return simulate_bimodal(spec, seed);
    if (kind == "reasoning") return simulate_reasoning(spec, seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("generator spec: " + std::string(e.what()));
  }
  throw InputError("unknown generator kind '" + kind + "' (expected cells, reasoning or bimodal)");
}

}  // namespace hieval::sim
