// hieval: hierarchical Bayesian analysis of LLM evaluation logs.
//
//   hieval fit         --data records.csv --model builtin:use_case1 --out fit/
//   hieval compare     fitA/ fitB/ ... --out cmp/
//   hieval report      fit/ [--scale prob|logit]
//   hieval simulate    --spec generator.json --seed 3 --out sim/
//   hieval prior-check --data records.csv --model builtin:use_case1 --draws 1000

#include <CLI11.hpp>

#include "hieval/commands.hpp"

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hieval::cli;

  CLI::App app{"Hierarchical Bayesian GLMs for LLM evaluation results"};
  app.set_version_flag("--version", hieval::io::kToolVersion);
  app.require_subcommand(1);

  FitOptions fit;
  std::string fit_group_by;
  auto* fit_cmd = app.add_subcommand("fit", "Sample the posterior of a model on evaluation records");
  fit_cmd->add_option("--data", fit.data, "Records file (.csv or .jsonl)")->required();
  fit_cmd->add_option("--model", fit.model, "builtin:<name> or a model config path")->capture_default_str();
  fit_cmd->add_option("--chains", fit.sampler.chains)->capture_default_str();
  fit_cmd->add_option("--warmup", fit.sampler.warmup)->capture_default_str();
  fit_cmd->add_option("--samples", fit.sampler.samples)->capture_default_str();
  fit_cmd->add_option("--seed", fit.sampler.seed)->capture_default_str();
  fit_cmd->add_option("--target-accept", fit.sampler.target_accept, "Step size adaptation target")
      ->capture_default_str();
  fit_cmd->add_option("--max-depth", fit.sampler.max_tree_depth, "Maximum NUTS tree depth")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Output directory")->capture_default_str();
  fit_cmd->add_option("--mass", fit.mass, "HPDI mass")->capture_default_str();
  fit_cmd->add_option("--group-by", fit_group_by, "Comma-separated factors defining cells");
  fit_cmd->add_flag("--first-repeat", fit.first_repeat, "Keep only repeat 1 of each task");
  fit_cmd->add_option("--rhat-max", fit.qc.rhat_max, "QC: largest acceptable R-hat")->capture_default_str();
  fit_cmd->add_option("--max-divergences", fit.qc.max_divergences, "QC: divergences allowed")->capture_default_str();
  fit_cmd->add_option("--ess-min", fit.qc.ess_min, "QC: smallest acceptable ESS")->capture_default_str();
  fit_cmd->add_flag("--quiet", fit.quiet, "No progress output");

  CompareOptions cmp;
  std::vector<std::string> cmp_dirs;
  auto* cmp_cmd = app.add_subcommand("compare", "Rank fitted models by WAIC");
  cmp_cmd->add_option("fits", cmp_dirs, "Fit output directories")->required();
  cmp_cmd->add_option("--out", cmp.out, "Output directory")->capture_default_str();

  ReportOptions rep;
  std::string rep_out, rep_levels, rep_trace;
  double rep_mass = 0.0;
  auto* rep_cmd = app.add_subcommand("report", "Forest, trace and baseline outputs for a fit");
  rep_cmd->add_option("fit", rep.fit, "Fit output directory")->required();
  rep_cmd->add_option("--out", rep_out, "Output directory (default: the fit directory)");
  rep_cmd->add_option("--scale", rep.scale, "prob or logit")->check(CLI::IsMember({"prob", "logit"}))
      ->capture_default_str();
  auto* mass_opt = rep_cmd->add_option("--mass", rep_mass, "HPDI mass (default: as fitted)");
  rep_cmd->add_option("--levels", rep_levels, "Comma-separated levels for the forest plot");
  rep_cmd->add_option("--trace", rep_trace, "Comma-separated parameters for the trace plot");

  SimulateOptions simo;
  std::uint64_t sim_seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic records with known truth");
  sim_cmd->add_option("--spec", simo.spec, "Generator spec (JSON)")->required();
  auto* sim_seed_opt = sim_cmd->add_option("--seed", sim_seed, "Overrides the seed in the spec");
  sim_cmd->add_option("--out", simo.out, "Output directory")->capture_default_str();

  PriorCheckOptions pc;
  std::string pc_group_by;
  auto* pc_cmd = app.add_subcommand("prior-check", "Prior predictive success rates per cell");
  pc_cmd->add_option("--data", pc.data, "Records file (.csv or .jsonl)")->required();
  pc_cmd->add_option("--model", pc.model)->capture_default_str();
  pc_cmd->add_option("--draws", pc.draws)->capture_default_str();
  pc_cmd->add_option("--seed", pc.seed)->capture_default_str();
  pc_cmd->add_option("--out", pc.out)->capture_default_str();
  pc_cmd->add_option("--group-by", pc_group_by, "Comma-separated factors defining cells");
  pc_cmd->add_flag("--first-repeat", pc.first_repeat);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  if (fit_cmd->parsed()) {
    fit.group_by = split_commas(fit_group_by);
    return cmd_fit(fit);
  }
  if (cmp_cmd->parsed()) {
    for (const auto& d : cmp_dirs) cmp.fits.emplace_back(d);
    return cmd_compare(cmp);
  }
  if (rep_cmd->parsed()) {
    if (!rep_out.empty()) rep.out = rep_out;
    if (mass_opt->count() > 0) rep.mass = rep_mass;
    rep.levels = split_commas(rep_levels);
    rep.trace = split_commas(rep_trace);
    return cmd_report(rep);
  }
  if (sim_cmd->parsed()) {
    if (sim_seed_opt->count() > 0) simo.seed = sim_seed;
    return cmd_simulate(simo);
  }
  if (pc_cmd->parsed()) {
    pc.group_by = split_commas(pc_group_by);
    return cmd_prior_check(pc);
  }
  return kInputError;
}
