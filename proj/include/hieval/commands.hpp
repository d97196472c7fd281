#pragma once

// The five CLI commands as library functions. Each returns the process exit
// code: 0 success, 1 QC thresholds violated, 2 input error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieval/baseline.hpp"
#include "hieval/compare.hpp"
#include "hieval/dataset.hpp"
#include "hieval/diagnostics.hpp"
#include "hieval/io.hpp"
#include "hieval/layout.hpp"
#include "hieval/modelspec.hpp"
#include "hieval/posterior.hpp"
#include "hieval/sampler.hpp"
#include "hieval/simulate.hpp"
#include "hieval/svg.hpp"

namespace hieval::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kQcFailed = 1, kInputError = 2, kNumericError = 3 };

struct QcThresholds {
  double rhat_max = 1.01;
  std::size_t max_divergences = 0;
  double ess_min = 400.0;
};

struct FitOptions {
  fs::path data;
  std::string model = "builtin:use_case1";
  SamplerConfig sampler;
  fs::path out = "fit";
  double mass = 0.95;
  std::vector<std::string> group_by;  // empty: derived from the model
  bool first_repeat = false;
  QcThresholds qc;
  bool quiet = false;
};

struct CompareOptions {
  std::vector<fs::path> fits;
  fs::path out = "comparison";
};

struct ReportOptions {
  fs::path fit;
  std::optional<fs::path> out;  // defaults to the fit directory
  std::string scale = "prob";   // prob or logit
  std::optional<double> mass;   // defaults to the mass used by the fit
  std::vector<std::string> levels;  // forest rows; empty: every level with <= 50 groups
  std::vector<std::string> trace;   // trace panels; empty: hyperparameters
};

struct SimulateOptions {
  fs::path spec;
  std::optional<std::uint64_t> seed;
  fs::path out = "sim";
};

struct PriorCheckOptions {
  std::string model = "builtin:use_case1";
  fs::path data;
  std::size_t draws = 1000;
  std::uint64_t seed = 1;
  fs::path out = "prior_check";
  std::vector<std::string> group_by;
  bool first_repeat = false;
};

/// Runs `body`, mapping exceptions onto exit codes and printing the message.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

// ---------------------------------------------------------------------------
// Shared pieces

/// Factors the cells are split on: every model factor, the factor carrying
/// each covariate, and `reasoning_effort` whenever the records carry it, so
/// fits with and without a reasoning slope share one cell table.
inline std::vector<std::string> default_group_by(const ModelSpec& spec, const std::vector<EvalRecord>& records) {
  std::vector<std::string> g = spec.factors();
  auto add = [&](const std::string& f) {
    if (std::find(g.begin(), g.end(), f) == g.end()) g.push_back(f);
  };
  for (const auto& c : spec.covariates()) add(c == "reasoning" ? "reasoning_effort" : c);
  const bool has_reasoning =
      std::any_of(records.begin(), records.end(), [](const EvalRecord& r) { return r.reasoning_effort.has_value(); });
  if (has_reasoning) add("reasoning_effort");
  return g;
}

inline CellTable load_cells(const fs::path& data, const ModelSpec& spec, std::vector<std::string>& group_by,
                            bool first_repeat) {
  std::vector<EvalRecord> records = load_records(data);
  if (first_repeat) records = first_repeat_filter(records);
  if (records.empty()) throw InputError("no records in " + data.string());
  if (group_by.empty()) group_by = default_group_by(spec, records);
  return canonicalize(aggregate_cells(records, group_by, spec.covariates()));
}

inline json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw InputError("missing " + p.string() + " (not a fit directory?)");
  try {
    return json::parse(io::read_file(p));
  } catch (const json::exception& e) {
    throw InputError("cannot parse " + p.string() + ": " + e.what());
  }
}

inline CellTable read_cells_file(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("missing " + p.string());
  std::ifstream in(p);
  return read_cells_csv(in);
}

// ---------------------------------------------------------------------------
// fit

struct QcReport {
  bool pass = true;
  double max_rhat = 1.0;
  std::string max_rhat_parameter;
  double min_ess = INFINITY;
  std::string min_ess_parameter;
  std::size_t divergences = 0;
  std::vector<std::string> failures;
};

inline QcReport quality_check(const std::vector<SummaryRow>& rows, std::size_t divergences, const QcThresholds& t) {
  QcReport q;
  q.divergences = divergences;
  for (const auto& r : rows) {
    if (r.r_hat && *r.r_hat > q.max_rhat) {
      q.max_rhat = *r.r_hat;
      q.max_rhat_parameter = r.parameter;
    }
    if (r.n_eff && *r.n_eff < q.min_ess) {
      q.min_ess = *r.n_eff;
      q.min_ess_parameter = r.parameter;
    }
  }
  std::ostringstream msg;
  if (q.max_rhat > t.rhat_max) {
    msg << "max R-hat " << q.max_rhat << " (" << q.max_rhat_parameter << ") > " << t.rhat_max;
    q.failures.push_back(msg.str());
    msg.str("");
  }
  if (divergences > t.max_divergences) {
    msg << divergences << " divergent transitions > " << t.max_divergences;
    q.failures.push_back(msg.str());
    msg.str("");
  }
  if (std::isfinite(q.min_ess) && q.min_ess < t.ess_min) {
    msg << "min ESS " << q.min_ess << " (" << q.min_ess_parameter << ") < " << t.ess_min;
    q.failures.push_back(msg.str());
  }
  q.pass = q.failures.empty();
  return q;
}

inline WaicResult fit_waic(const ParameterLayout& L, const CellTable& cells, const Draws& draws) {
  WaicAccumulator acc(L.spec.name, cells.keys());
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t s = 0; s < draws.samples; ++s) {
      const std::span<const double> u(draws.chain[c].values.data() + s * draws.dim, draws.dim);
      acc.add(pointwise_log_lik(L, constrain(L, u, cells), cells));
    }
  }
  return acc.result();
}

inline int cmd_fit(const FitOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    opt.sampler.validate();
    if (!(opt.mass > 0.0 && opt.mass < 1.0)) throw InputError("--mass must lie in (0, 1)");
    const ModelSpec spec = resolve_model_ref(opt.model);
    std::vector<std::string> group_by = opt.group_by;
    const CellTable cells = load_cells(opt.data, spec, group_by, opt.first_repeat);
    const ParameterLayout L = build_layout(spec, cells);
    for (const auto& w : validate_spec(spec, cells).warnings) err << "warning: " << w << '\n';

    ProgressHook progress;
    const std::size_t total = opt.sampler.warmup + opt.sampler.samples;
    if (!opt.quiet) {
      progress = [&err, total](std::size_t chain, std::size_t iter, std::size_t) {
        if (iter % 500 == 0 || iter == total) {
          static std::mutex m;
          std::lock_guard<std::mutex> lock(m);
          err << "chain " << chain + 1 << ": " << iter << "/" << total << '\n';
        }
      };
    }
    const Draws draws = run_chains(L, cells, opt.sampler, progress);
    const DivergenceCounts div = divergence_count(draws);
    const std::vector<SummaryRow> rows = summary_table(draws, L, opt.mass);
    const DerivedDraws derived = derive(L, draws);
    const WaicResult w = fit_waic(L, cells, draws);
    const QcReport qc = quality_check(rows, div.total, opt.qc);

    fs::create_directories(opt.out);
    io::write_atomic(opt.out / "draws.csv", [&](std::ostream& o) { io::write_draws_csv(o, draws, L, derived); });
    io::write_atomic(opt.out / "summary.csv", [&](std::ostream& o) { io::write_summary_csv(o, rows); });
    io::write_atomic(opt.out / "cells.csv", [&](std::ostream& o) { write_cells_csv(o, cells); });
    io::write_atomic(opt.out / "waic.csv", [&](std::ostream& o) { io::write_waic_pointwise_csv(o, w); });

    std::ostringstream diag;
    diag << (qc.pass ? "QC PASS" : "QC FAIL") << '\n';
    for (const auto& f : qc.failures) diag << "  - " << f << '\n';
    diag << "model: " << spec.name << "\n";
    diag << "parameters: " << L.total_dim << ", cells: " << cells.size() << ", trials: " << cells.total_trials()
         << "\n";
    diag << "chains: " << draws.chains << " x " << draws.samples << " draws (warmup " << opt.sampler.warmup << ")\n";
    diag << "max R-hat: " << qc.max_rhat << (qc.max_rhat_parameter.empty() ? "" : " (" + qc.max_rhat_parameter + ")")
         << " threshold " << opt.qc.rhat_max << '\n';
    if (std::isfinite(qc.min_ess)) {
      diag << "min ESS: " << qc.min_ess << " (" << qc.min_ess_parameter << ") threshold " << opt.qc.ess_min << '\n';
    }
    diag << "divergences: " << div.total << " threshold " << opt.qc.max_divergences << " (per chain:";
    for (auto d : div.per_chain) diag << ' ' << d;
    diag << ")\n";
    for (std::size_t c = 0; c < draws.chains; ++c) {
      diag << "chain " << c + 1 << ": step size " << draws.chain[c].step_size << ", warmup divergences "
           << draws.chain[c].warmup_divergences << '\n';
    }
    diag << "elpd_waic: " << w.elpd_waic << " (se " << w.se << ", p_waic " << w.p_waic << ")\n";
    if (w.few_draws()) diag << "note: fewer than 100 draws; WAIC is unreliable\n";
    io::write_atomic(opt.out / "diagnostics.txt", diag.str());

    json manifest = {
        {"tool_version", io::kToolVersion},
        {"model", {{"ref", opt.model}, {"name", spec.name}, {"config", serialize_model_config(spec)}}},
        {"sampler",
         {{"chains", opt.sampler.chains},
          {"warmup", opt.sampler.warmup},
          {"samples", opt.sampler.samples},
          {"seed", opt.sampler.seed},
          {"target_accept", opt.sampler.target_accept},
          {"max_tree_depth", opt.sampler.max_tree_depth},
          {"init_radius", opt.sampler.init_radius}}},
        {"data",
         {{"path", opt.data.string()},
          {"fingerprint_fnv1a64", io::file_fingerprint(opt.data)},
          {"group_by", group_by},
          {"covariates", spec.covariates()},
          {"first_repeat", opt.first_repeat}}},
        {"seed", opt.sampler.seed},
        {"mass", opt.mass},
        {"qc",
         {{"pass", qc.pass},
          {"rhat_max", opt.qc.rhat_max},
          {"max_divergences", opt.qc.max_divergences},
          {"ess_min", opt.qc.ess_min},
          {"divergences", div.total},
          {"failures", qc.failures}}},
        {"waic", {{"elpd_waic", w.elpd_waic}, {"p_waic", w.p_waic}, {"se", w.se}, {"draws", w.draws}}},
        {"outputs", {"draws.csv", "summary.csv", "cells.csv", "waic.csv", "diagnostics.txt", "manifest.json"}},
    };
    io::write_atomic(opt.out / "manifest.json", manifest.dump(2) + "\n");

    out << diag.str();
    out << "wrote " << opt.out.string() << '\n';
    return qc.pass ? kOk : kQcFailed;
  });
}

// ---------------------------------------------------------------------------
// compare

inline int cmd_compare(const CompareOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    if (opt.fits.size() < 2) throw InputError("need >= 2 models to compare (got " + std::to_string(opt.fits.size()) + ")");
    std::vector<WaicResult> results;
    std::map<std::string, int> seen;
    for (const auto& dir : opt.fits) {
      const json m = read_manifest(dir);
      std::string name = m.at("model").at("name").get<std::string>();
      if (seen[name]++ > 0) name += "#" + std::to_string(seen[name]);
      const std::size_t draws = m.at("waic").at("draws").get<std::size_t>();
      const fs::path wp = dir / "waic.csv";
      if (!fs::exists(wp)) throw InputError("missing " + wp.string());
      results.push_back(io::read_waic_pointwise_csv(wp, name, draws));
    }
    const Ranking r = rank_models(results);
    fs::create_directories(opt.out);
    io::write_atomic(opt.out / "comparison.csv", [&](std::ostream& o) {
      o << "rank,model,elpd_waic,p_waic,waic,se,delta_elpd,se_delta,indistinct_from_best,fit\n";
      for (std::size_t i = 0; i < r.entries.size(); ++i) {
        const RankEntry& e = r.entries[i];
        o << csv::join({std::to_string(i + 1), e.model, csv::format_double(e.elpd_waic), csv::format_double(e.p_waic),
                        csv::format_double(e.waic_deviance), csv::format_double(e.se),
                        csv::format_double(e.delta_vs_best), csv::format_double(e.se_delta),
                        i == 0 ? "NA" : (e.indistinct_from_best ? "true" : "false"), opt.fits[e.index].string()})
          << '\n';
      }
    });
    io::write_atomic(opt.out / "comparison_pairs.csv", [&](std::ostream& o) {
      o << "better,worse,delta_elpd,se_delta,indistinct\n";
      for (const auto& p : r.pairs) {
        o << csv::join({r.entries[p.better].model, r.entries[p.worse].model, csv::format_double(p.delta_elpd),
                        csv::format_double(p.se_delta), p.indistinct ? "true" : "false"})
          << '\n';
      }
    });
    std::vector<svg::WaicBar> bars;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const RankEntry& e = r.entries[i];
      svg::WaicBar b{e.model, e.elpd_waic, e.se, std::nullopt, std::nullopt};
      if (i > 0) {
        b.delta = e.delta_vs_best;
        b.delta_se = e.se_delta;
      }
      bars.push_back(b);
    }
    io::write_atomic(opt.out / "waic.svg", svg::waic_plot(bars, io::kToolVersion));

    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const RankEntry& e = r.entries[i];
      out << i + 1 << ". " << e.model << "  elpd " << e.elpd_waic << " (se " << e.se << ")";
      if (i > 0) {
        out << "  delta " << e.delta_vs_best << " +/- " << e.se_delta
            << (e.indistinct_from_best ? "  [indistinct from best]" : "");
      }
      out << '\n';
    }
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// report

struct FitArtifacts {
  json manifest;
  ModelSpec spec;
  CellTable cells;
  ParameterLayout layout;
  io::DrawsTable draws;
};

inline FitArtifacts load_fit(const fs::path& dir) {
  FitArtifacts a;
  a.manifest = read_manifest(dir);
  a.spec = parse_model_config(a.manifest.at("model").at("config").get<std::string>());
  a.cells = read_cells_file(dir / "cells.csv");
  a.layout = build_layout(a.spec, a.cells);
  const fs::path dp = dir / "draws.csv";
  if (!fs::exists(dp)) throw InputError("missing " + dp.string());
  a.draws = io::read_draws_csv(dp);
  if (a.draws.chains == 0 || a.draws.samples() == 0) throw InputError(dp.string() + " holds no draws");
  return a;
}

struct BaselineRow {
  std::string level;
  std::string group;
  std::int64_t k = 0;
  std::int64_t n = 0;
  MeanSem stats;
};

/// Pooled success counts of every group of every level.
inline std::vector<BaselineRow> baseline_rows(const ParameterLayout& L, const CellTable& cells) {
  std::vector<BaselineRow> rows;
  for (const LevelPlan& lp : L.levels) {
    const detail::Grouping g = detail::group_cells(cells, lp.key_factors);
    std::vector<std::int64_t> k(g.labels.size(), 0), n(g.labels.size(), 0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      k[g.cell_group[c]] += cells.cells[c].successes;
      n[g.cell_group[c]] += cells.cells[c].trials;
    }
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      rows.push_back({lp.name, g.labels[i], k[i], n[i], mean_sem_counts(k[i], n[i])});
    }
  }
  return rows;
}

inline std::vector<double> expand_binary(std::int64_t k, std::int64_t n) {
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  std::fill(v.begin(), v.begin() + k, 1.0);
  return v;
}

inline int cmd_report(const ReportOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    if (opt.scale != "prob" && opt.scale != "logit") throw InputError("--scale must be prob or logit");
    const FitArtifacts a = load_fit(opt.fit);
    const double mass = opt.mass.value_or(a.manifest.value("mass", 0.95));
    if (!(mass > 0.0 && mass < 1.0)) throw InputError("--mass must lie in (0, 1)");
    const fs::path dir = opt.out.value_or(opt.fit);
    fs::create_directories(dir);
    const bool prob = opt.scale == "prob";
    const ParameterLayout& L = a.layout;

    const std::vector<BaselineRow> base = baseline_rows(L, a.cells);
    auto pooled = [&](std::size_t col) {
      std::vector<double> v;
      for (const auto& ch : a.draws.data) v.insert(v.end(), ch[col].begin(), ch[col].end());
      return v;
    };
    auto bracket = [](const std::string& n, const std::string& g) { return g.empty() ? n : n + "[" + g + "]"; };

    std::vector<svg::ForestRow> forest;
    std::vector<std::string> forest_level;
    std::size_t bi = 0;
    for (const LevelPlan& lp : L.levels) {
      const bool wanted = opt.levels.empty()
                              ? lp.groups() <= 50
                              : std::find(opt.levels.begin(), opt.levels.end(), lp.name) != opt.levels.end();
      for (std::size_t g = 0; g < lp.groups(); ++g, ++bi) {
        if (!wanted) continue;
        const std::string col = bracket(lp.name + (prob ? "_p" : "_effect"), lp.group_labels[g]);
        const auto idx = a.draws.column(col);
        if (!idx) throw InputError("draws file lacks column '" + col + "'");
        const std::vector<double> v = pooled(*idx);
        const Interval h = hpdi(v, mass);
        svg::ForestRow row;
        row.label = bracket(lp.name, lp.group_labels[g]);
        row.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        row.low = h.low;
        row.high = h.high;
        const MeanSem& ms = base[bi].stats;
        if (prob) {
          row.baseline_mean = ms.mean;
          row.baseline_sem = ms.sem;
        } else if (ms.mean > 0.0 && ms.mean < 1.0) {
          row.baseline_mean = math::logit(ms.mean);
          if (ms.sem) row.baseline_sem = *ms.sem / (ms.mean * (1.0 - ms.mean));
        }
        forest.push_back(row);
        forest_level.push_back(lp.name);
      }
    }
    if (!prob) {
      for (const SlopePlan& sp : L.slopes) {
        for (const auto& label : sp.group_labels) {
          const std::string col = bracket(sp.name, label);
          const auto idx = a.draws.column(col);
          if (!idx) throw InputError("draws file lacks column '" + col + "'");
          const std::vector<double> v = pooled(*idx);
          const Interval h = hpdi(v, mass);
          svg::ForestRow row;
          row.label = col;
          row.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
          row.low = h.low;
          row.high = h.high;
          forest.push_back(row);
          forest_level.push_back(sp.name);
        }
      }
    }

    char mass_txt[16];
    std::snprintf(mass_txt, sizeof mass_txt, "%g", mass * 100.0);
    const std::string title = a.spec.name + ": posterior mean and " + mass_txt + "% HPDI vs empirical mean +/- SEM";
    const std::string axis = prob ? "success probability" : "logit";
    io::write_atomic(dir / "forest.svg",
                     svg::forest_plot(forest, title, axis, io::kToolVersion,
                                      prob ? std::nullopt : std::optional<double>(0.0)));
    io::write_atomic(dir / "forest.csv", [&](std::ostream& o) {
      o << "term,parameter,scale,mean,hpdi_low,hpdi_high,mass,empirical_mean,sem\n";
      for (std::size_t i = 0; i < forest.size(); ++i) {
        const auto& r = forest[i];
        o << csv::join({forest_level[i], r.label, opt.scale, csv::format_double(r.mean), csv::format_double(r.low),
                        csv::format_double(r.high), csv::format_double(mass),
                        r.baseline_mean ? csv::format_double(*r.baseline_mean) : "NA",
                        io::format_optional(r.baseline_sem)})
          << '\n';
      }
    });

    io::write_atomic(dir / "baseline.csv", [&](std::ostream& o) {
      o << "level,group,k,n,mean,sem\n";
      for (const auto& b : base) {
        o << csv::join({b.level, b.group, std::to_string(b.k), std::to_string(b.n), csv::format_double(b.stats.mean),
                        io::format_optional(b.stats.sem)})
          << '\n';
      }
    });
    // Welch tests between the groups of each level (levels with 2..10 groups).
    io::write_atomic(dir / "ttests.csv", [&](std::ostream& o) {
      o << "level,group_a,group_b,method,t,df,p\n";
      std::size_t start = 0;
      for (const LevelPlan& lp : L.levels) {
        const std::size_t ng = lp.groups();
        if (ng >= 2 && ng <= 10) {
          for (std::size_t i = 0; i < ng; ++i) {
            for (std::size_t j = i + 1; j < ng; ++j) {
              const BaselineRow& x = base[start + i];
              const BaselineRow& y = base[start + j];
              std::string t = "NA", df = "NA", p = "NA";
              try {
                const auto xs = expand_binary(x.k, x.n);
                const auto ys = expand_binary(y.k, y.n);
                const TTestResult r = t_test_independent(xs, ys);
                t = csv::format_double(r.t);
                df = csv::format_double(r.df);
                p = csv::format_double(r.p);
              } catch (const InputError&) {
              }
              o << csv::join({lp.name, x.group, y.group, "independent-welch", t, df, p}) << '\n';
            }
          }
        }
        start += ng;
      }
    });

    std::vector<std::string> trace = opt.trace;
    if (trace.empty()) {
      for (const LayoutEntry& e : L.entries) {
        if (e.role != Role::hypermean && e.role != Role::hyperscale && e.role != Role::dispersion) continue;
        for (std::size_t i = 0; i < e.size && trace.size() < 8; ++i) trace.push_back(e.element_name(i));
      }
    }
    std::vector<svg::TracePanel> panels;
    for (const auto& name : trace) {
      const auto idx = a.draws.column(name);
      if (!idx) throw InputError("unknown parameter '" + name + "' for trace plot");
      panels.push_back({name, a.draws.series(*idx)});
    }
    io::write_atomic(dir / "trace.svg", svg::trace_plot(panels, io::kToolVersion));

    out << "wrote forest.svg, forest.csv, baseline.csv, ttests.csv, trace.svg to " << dir.string() << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    if (!fs::exists(opt.spec)) throw InputError("cannot open generator spec " + opt.spec.string());
    json spec;
    try {
      spec = json::parse(io::read_file(opt.spec));
    } catch (const json::exception& e) {
      throw InputError("cannot parse generator spec: " + std::string(e.what()));
    }
    std::uint64_t seed = 1;
    if (opt.seed) {
      seed = *opt.seed;
    } else if (spec.contains("seed")) {
      seed = spec.at("seed").get<std::uint64_t>();
    }
    const sim::Simulated s = sim::simulate(spec, seed);
    fs::create_directories(opt.out);
    io::write_atomic(opt.out / "records.csv", [&](std::ostream& o) { write_records_csv(o, s.records); });
    io::write_atomic(opt.out / "truth.json", s.truth.dump(2) + "\n");
    out << "wrote " << s.records.size() << " records to " << (opt.out / "records.csv").string() << '\n';
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// prior-check

struct PriorCheckRow {
  std::string cell;
  std::int64_t n = 0;
  double mean = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;
};

/// Prior predictive success rates per cell, plus a pooled row `__all__`.
inline std::vector<PriorCheckRow> prior_check(const ParameterLayout& L, const CellTable& cells, std::size_t draws,
                                              std::uint64_t seed) {
  if (draws < 2) throw InputError("prior check needs at least 2 draws");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> rate(cells.size() + 1, std::vector<double>(draws));
  const double total_n = static_cast<double>(cells.total_trials());
  for (std::size_t d = 0; d < draws; ++d) {
    const PriorPredictive pp = prior_predictive_draw(L, cells, rng);
    double k_all = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      rate[c][d] = static_cast<double>(pp.k[c]) / static_cast<double>(cells.cells[c].trials);
      k_all += static_cast<double>(pp.k[c]);
    }
    rate[cells.size()][d] = k_all / total_n;
  }
  std::vector<PriorCheckRow> rows;
  for (std::size_t c = 0; c <= cells.size(); ++c) {
    std::vector<double> v = rate[c];
    std::sort(v.begin(), v.end());
    PriorCheckRow r;
    r.cell = c < cells.size() ? cells.key(c) : "__all__";
    r.n = c < cells.size() ? cells.cells[c].trials : cells.total_trials();
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    r.q05 = quantile_sorted(v, 0.05);
    r.q50 = quantile_sorted(v, 0.5);
    r.q95 = quantile_sorted(v, 0.95);
    rows.push_back(r);
  }
  return rows;
}

inline int cmd_prior_check(const PriorCheckOptions& opt, std::ostream& out = std::cout,
                           std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    const ModelSpec spec = resolve_model_ref(opt.model);
    std::vector<std::string> group_by = opt.group_by;
    const CellTable cells = load_cells(opt.data, spec, group_by, opt.first_repeat);
    const ParameterLayout L = build_layout(spec, cells);
    const auto rows = prior_check(L, cells, opt.draws, opt.seed);
    fs::create_directories(opt.out);
    io::write_atomic(opt.out / "prior_check.csv", [&](std::ostream& o) {
      o << "cell,n,mean,q05,q50,q95\n";
      for (const auto& r : rows) {
        o << csv::join({r.cell, std::to_string(r.n), csv::format_double(r.mean), csv::format_double(r.q05),
                        csv::format_double(r.q50), csv::format_double(r.q95)})
          << '\n';
      }
    });
    const auto& all = rows.back();
    out << "prior predictive success rate: mean " << all.mean << ", 90% interval [" << all.q05 << ", " << all.q95
        << "]\n";
    if (all.q05 > 0.95 || all.q95 < 0.05) {
      out << "warning: the prior concentrates near " << (all.q05 > 0.95 ? "1" : "0")
          << "; it may be overconfident\n";
    }
    return kOk;
  });
}

}  // namespace hieval::cli
