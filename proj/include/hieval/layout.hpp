#pragma once

// Flattening of a ModelSpec + CellTable into an unconstrained parameter
// vector. Entries are laid out per level in declaration order (mu, sigma,
// then z or the centered effects), then per slope, then the dispersion.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hieval/dataset.hpp"
#include "hieval/error.hpp"
#include "hieval/modelspec.hpp"
#include "hieval/special.hpp"

namespace hieval {

enum class Transform { identity, log };

enum class Role { hypermean, hyperscale, zscore, effect, slope, dispersion };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::hypermean: return "hypermean";
    case Role::hyperscale: return "hyperscale";
    case Role::zscore: return "zscore";
    case Role::effect: return "effect";
    case Role::slope: return "slope";
    case Role::dispersion: return "dispersion";
  }
  return "";
}

struct LayoutEntry {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  Transform transform = Transform::identity;
  std::optional<PriorSpec> prior;  // nullopt for centered effects (prior depends on other entries)
  Role role = Role::hypermean;
  std::vector<std::string> labels;  // one per element; empty label for scalar groups

  std::string element_name(std::size_t i) const {
    if (labels.empty() || labels[i].empty()) return size == 1 ? name : name + "[" + std::to_string(i) + "]";
    return name + "[" + labels[i] + "]";
  }
};

inline constexpr std::size_t kNoEntry = static_cast<std::size_t>(-1);

/// Compiled form of one level.
struct LevelPlan {
  std::string name;
  std::vector<std::size_t> key_factors;  // positions in CellTable::factors
  std::vector<std::string> group_labels;
  std::size_t parent = kNoEntry;  // index into Layout::levels
  std::vector<std::uint32_t> parent_group;  // per group
  MeanSpec::Kind mean_kind = MeanSpec::Kind::prior;
  double fixed_value = 0.0;
  bool pooled = true;
  bool noncentered = true;
  std::size_t mu_entry = kNoEntry;  // sized per parent group, or per group when unpooled
  std::size_t sigma_entry = kNoEntry;
  std::size_t z_entry = kNoEntry;  // z scores (non-centered) or effects (centered)

  std::size_t groups() const { return group_labels.size(); }
};

struct SlopePlan {
  std::string name;
  std::vector<std::size_t> key_factors;
  std::vector<std::string> group_labels;
  std::size_t covariate = 0;  // position in CellTable::covariate_names
  bool noncentered = true;
  std::size_t mu_entry = kNoEntry;
  std::size_t sigma_entry = kNoEntry;
  std::size_t z_entry = kNoEntry;

  std::size_t groups() const { return group_labels.size(); }
};

/// One predictor term of one cell: coefficient times group value of a level or slope.
struct TermBinding {
  bool is_slope = false;
  std::uint32_t index = 0;  // level or slope index
};

struct ParameterLayout {
  ModelSpec spec;
  std::vector<LayoutEntry> entries;
  std::size_t total_dim = 0;
  std::vector<LevelPlan> levels;
  std::vector<SlopePlan> slopes;
  std::vector<TermBinding> terms;
  std::size_t dispersion_entry = kNoEntry;

  // Cell bindings, flattened [cell * terms.size() + t].
  std::vector<std::uint32_t> cell_group;
  std::vector<double> cell_coef;
  std::vector<double> cell_log_choose;
  std::vector<std::string> cell_keys;
  std::size_t n_cells = 0;

  bool prior_only = false;  // skip the likelihood (prior sampling / calibration)

  bool betabinomial() const { return spec.likelihood.family == LikelihoodFamily::betabinomial_logit; }

  std::vector<std::string> element_names() const {
    std::vector<std::string> out;
    out.reserve(total_dim);
    for (const auto& e : entries) {
      for (std::size_t i = 0; i < e.size; ++i) out.push_back(e.element_name(i));
    }
    return out;
  }

  std::optional<std::size_t> find_entry(std::string_view name) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name == name) return i;
    }
    return std::nullopt;
  }
};

namespace detail {

struct Grouping {
  std::vector<std::vector<std::uint32_t>> tuples;  // sorted
  std::vector<std::uint32_t> cell_group;           // per cell
  std::vector<std::string> labels;
};

inline Grouping group_cells(const CellTable& cells, const std::vector<std::size_t>& key) {
  Grouping g;
  std::map<std::vector<std::uint32_t>, std::uint32_t> index;
  std::vector<std::vector<std::uint32_t>> per_cell(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<std::uint32_t> t;
    t.reserve(key.size());
    for (std::size_t f : key) t.push_back(cells.cells[c].codes[f]);
    index.emplace(t, 0);
    per_cell[c] = std::move(t);
  }
  if (key.empty()) index.emplace(std::vector<std::uint32_t>{}, 0);
  std::uint32_t next = 0;
  for (auto& [tuple, code] : index) {
    code = next++;
    g.tuples.push_back(tuple);
    std::string label;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (i) label.push_back(',');
      label += cells.factors[key[i]].label(tuple[i]);
    }
    g.labels.push_back(std::move(label));
  }
  g.cell_group.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) g.cell_group[c] = index.at(per_cell[c]);
  return g;
}

}  // namespace detail

/// Compiles spec + cells into a layout. Throws SpecError when validation fails.
inline ParameterLayout build_layout(const ModelSpec& spec, const CellTable& cells) {
  const ValidationReport report = validate_spec(spec, cells);
  if (!report.ok()) {
    std::string msg = "model does not match data:";
    for (const auto& e : report.errors) msg += " " + e + ";";
    throw SpecError(msg);
  }

  ParameterLayout L;
  L.spec = spec;
  L.n_cells = cells.size();

  auto add_entry = [&](std::string name, std::size_t size, std::optional<PriorSpec> prior, Role role,
                       std::vector<std::string> labels) {
    LayoutEntry e;
    e.name = std::move(name);
    e.offset = L.total_dim;
    e.size = size;
    e.prior = prior;
    e.transform = prior && prior->positive_support() ? Transform::log : Transform::identity;
    e.role = role;
    e.labels = std::move(labels);
    L.total_dim += size;
    L.entries.push_back(std::move(e));
    return L.entries.size() - 1;
  };

  std::vector<std::vector<std::uint32_t>> level_cell_group;
  std::vector<std::vector<std::vector<std::uint32_t>>> level_tuples;

  for (const LevelSpec& ls : spec.levels) {
    LevelPlan plan;
    plan.name = ls.name;
    plan.mean_kind = ls.mu.kind;
    plan.fixed_value = ls.mu.kind == MeanSpec::Kind::fixed ? ls.mu.value : 0.0;
    plan.pooled = ls.sigma.has_value();
    plan.noncentered = ls.noncentered;

    std::vector<std::string> parent_labels = {""};
    if (ls.parent) {
      for (std::size_t j = 0; j < L.levels.size(); ++j) {
        if (L.levels[j].name == *ls.parent) plan.parent = j;
      }
      plan.key_factors = L.levels[plan.parent].key_factors;
      parent_labels = L.levels[plan.parent].group_labels;
    }
    if (ls.factor) {
      const std::size_t pos = *cells.factor_position(*ls.factor);
      if (std::find(plan.key_factors.begin(), plan.key_factors.end(), pos) == plan.key_factors.end()) {
        plan.key_factors.push_back(pos);
      }
    }
    detail::Grouping g = detail::group_cells(cells, plan.key_factors);
    plan.group_labels = g.labels;
    plan.parent_group.assign(g.tuples.size(), 0);
    if (plan.parent != kNoEntry) {
      const auto& ptuples = level_tuples[plan.parent];
      const std::size_t plen = L.levels[plan.parent].key_factors.size();
      std::map<std::vector<std::uint32_t>, std::uint32_t> pindex;
      for (std::uint32_t i = 0; i < ptuples.size(); ++i) pindex.emplace(ptuples[i], i);
      for (std::size_t i = 0; i < g.tuples.size(); ++i) {
        std::vector<std::uint32_t> prefix(g.tuples[i].begin(), g.tuples[i].begin() + plen);
        plan.parent_group[i] = pindex.at(prefix);
      }
    }

    if (ls.mu.kind == MeanSpec::Kind::prior) {
      if (plan.pooled) {
        plan.mu_entry = add_entry("mu_" + ls.name, parent_labels.size(), ls.mu.prior, Role::hypermean, parent_labels);
      } else {
        plan.mu_entry = add_entry("mu_" + ls.name, g.labels.size(), ls.mu.prior, Role::effect, g.labels);
      }
    }
    if (plan.pooled) {
      plan.sigma_entry = add_entry("sigma_" + ls.name, 1, ls.sigma, Role::hyperscale, {});
      if (ls.noncentered) {
        plan.z_entry = add_entry("z_" + ls.name, g.labels.size(), PriorSpec::normal(0, 1), Role::zscore, g.labels);
      } else {
        plan.z_entry = add_entry("effect_" + ls.name, g.labels.size(), std::nullopt, Role::effect, g.labels);
      }
    }
    level_cell_group.push_back(std::move(g.cell_group));
    level_tuples.push_back(std::move(g.tuples));
    L.levels.push_back(std::move(plan));
  }

  std::vector<std::vector<std::uint32_t>> slope_cell_group;
  for (const SlopeSpec& ss : spec.slopes) {
    SlopePlan plan;
    plan.name = ss.name;
    plan.noncentered = ss.noncentered;
    plan.covariate = *cells.covariate_position(ss.covariate);
    for (const auto& f : ss.indexed_by) plan.key_factors.push_back(*cells.factor_position(f));
    detail::Grouping g = detail::group_cells(cells, plan.key_factors);
    plan.group_labels = g.labels;
    plan.mu_entry = add_entry("mu_" + ss.name, g.labels.size(), ss.mu_prior, Role::hypermean, g.labels);
    plan.sigma_entry = add_entry("sigma_" + ss.name, 1, ss.sigma_prior, Role::hyperscale, {});
    if (ss.noncentered) {
      plan.z_entry = add_entry("z_" + ss.name, g.labels.size(), PriorSpec::normal(0, 1), Role::zscore, g.labels);
    } else {
      plan.z_entry = add_entry("effect_" + ss.name, g.labels.size(), std::nullopt, Role::slope, g.labels);
    }
    slope_cell_group.push_back(std::move(g.cell_group));
    L.slopes.push_back(std::move(plan));
  }

  if (L.betabinomial()) {
    L.dispersion_entry = add_entry("phi", 1, spec.likelihood.dispersion_prior, Role::dispersion, {});
  }

  for (const auto& t : spec.predictor_terms) {
    TermBinding b;
    for (std::size_t i = 0; i < L.levels.size(); ++i) {
      if (L.levels[i].name == t) b = {false, static_cast<std::uint32_t>(i)};
    }
    for (std::size_t i = 0; i < L.slopes.size(); ++i) {
      if (L.slopes[i].name == t) b = {true, static_cast<std::uint32_t>(i)};
    }
    L.terms.push_back(b);
  }

  const std::size_t nt = L.terms.size();
  L.cell_group.resize(cells.size() * nt);
  L.cell_coef.resize(cells.size() * nt);
  L.cell_log_choose.resize(cells.size());
  L.cell_keys = cells.keys();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells.cells[c];
    if (cell.trials < 1 || cell.successes < 0 || cell.successes > cell.trials) {
      throw InputError("cell " + L.cell_keys[c] + " needs 0 <= k <= n and n >= 1");
    }
    for (std::size_t t = 0; t < nt; ++t) {
      const TermBinding& b = L.terms[t];
      if (b.is_slope) {
        L.cell_group[c * nt + t] = slope_cell_group[b.index][c];
        L.cell_coef[c * nt + t] = cell.covariates[L.slopes[b.index].covariate];
      } else {
        L.cell_group[c * nt + t] = level_cell_group[b.index][c];
        L.cell_coef[c * nt + t] = 1.0;
      }
    }
    L.cell_log_choose[c] = math::log_choose(cell.trials, cell.successes);
  }
  return L;
}

}  // namespace hieval
