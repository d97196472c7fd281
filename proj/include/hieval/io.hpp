#pragma once

// Run artifacts on disk: atomic writes, content fingerprints, the columnar
// draws CSV and its reader.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "hieval/csv.hpp"
#include "hieval/diagnostics.hpp"
#include "hieval/error.hpp"
#include "hieval/sampler.hpp"

namespace hieval::io {

inline constexpr const char* kToolVersion = "hieval 0.1.0";

/// 64-bit FNV-1a over raw bytes, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_fingerprint(const std::filesystem::path& path) { return fnv1a_hex(read_file(path)); }

/// Writes through a sibling temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  write_atomic(path, [&](std::ostream& out) { out << content; });
}

inline std::string format_optional(const std::optional<double>& v) { return v ? csv::format_double(*v) : "NA"; }

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& stat_columns() {
  static const std::vector<std::string> cols = {"lp__",        "accept_stat__", "stepsize__", "treedepth__",
                                                "n_leapfrog__", "divergent__",   "energy__"};
  return cols;
}

/// One row per post-warmup draw: chain, draw, sampler stats, constrained
/// parameters, then derived effects.
inline void write_draws_csv(std::ostream& out, const Draws& draws, const ParameterLayout& L,
                            const DerivedDraws& derived) {
  std::vector<std::string> header = {"chain", "draw"};
  header.insert(header.end(), stat_columns().begin(), stat_columns().end());
  for (const auto& n : L.element_names()) header.push_back(n);
  header.insert(header.end(), derived.names.begin(), derived.names.end());
  out << csv::join(header) << '\n';
  const std::size_t w = derived.width();
  std::string line;
  for (std::size_t c = 0; c < draws.chains; ++c) {
    for (std::size_t s = 0; s < draws.samples; ++s) {
      const TransitionStats& st = draws.chain[c].stats[s];
      line.clear();
      line += std::to_string(c + 1);
      line += ',';
      line += std::to_string(s + 1);
      for (double v : {st.lp, st.accept_stat, st.step_size}) {
        line += ',';
        line += csv::format_double(v);
      }
      line += ',' + std::to_string(st.tree_depth) + ',' + std::to_string(st.n_leapfrog) + ',' +
              (st.divergent ? "1" : "0") + ',' + csv::format_double(st.energy);
      for (std::size_t d = 0; d < draws.dim; ++d) {
        line += ',';
        line += csv::format_double(draws.constrained_at(c, s, d));
      }
      for (std::size_t j = 0; j < w; ++j) {
        line += ',';
        line += csv::format_double(derived.values[c][s * w + j]);
      }
      out << line << '\n';
    }
  }
}

/// Draws CSV read back as named columns split by chain.
struct DrawsTable {
  std::vector<std::string> columns;  // all columns after `chain,draw`
  std::size_t chains = 0;
  std::vector<std::vector<std::vector<double>>> data;  // chain -> column -> series

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    return std::nullopt;
  }

  ChainSeries series(std::size_t col) const {
    ChainSeries out;
    for (const auto& ch : data) out.push_back(ch[col]);
    return out;
  }

  std::size_t samples() const { return data.empty() || data[0].empty() ? 0 : data[0][0].size(); }
};

inline DrawsTable read_draws_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  if (t.header.size() < 2 || t.header[0] != "chain" || t.header[1] != "draw") {
    throw InputError(path.string() + " is not a draws file (expected chain,draw columns)");
  }
  DrawsTable out;
  out.columns.assign(t.header.begin() + 2, t.header.end());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto chain = csv::parse_double(t.rows[r][0]);
    if (!chain || *chain < 1) throw InputError("bad chain index at line " + std::to_string(t.line_numbers[r]));
    const auto c = static_cast<std::size_t>(*chain) - 1;
    while (out.data.size() <= c) out.data.emplace_back(out.columns.size());
    for (std::size_t j = 0; j < out.columns.size(); ++j) {
      const auto v = csv::parse_double(t.rows[r][j + 2]);
      if (!v) throw InputError("non-numeric draw value at line " + std::to_string(t.line_numbers[r]));
      out.data[c][j].push_back(*v);
    }
  }
  out.chains = out.data.size();
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "parameter,mean,sd,hpdi_low,hpdi_high,n_eff,r_hat\n";
  for (const auto& r : rows) {
    out << csv::join({r.parameter, csv::format_double(r.mean), csv::format_double(r.sd),
                      csv::format_double(r.hpdi_low), csv::format_double(r.hpdi_high), format_optional(r.n_eff),
                      format_optional(r.r_hat)})
        << '\n';
  }
}

struct SummaryCsvRow {
  std::string parameter;
  double mean, sd, hpdi_low, hpdi_high;
};

inline std::vector<SummaryCsvRow> read_summary_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  const auto p = t.column("parameter"), m = t.column("mean"), s = t.column("sd"), lo = t.column("hpdi_low"),
             hi = t.column("hpdi_high");
  if (!p || !m || !s || !lo || !hi) throw InputError(path.string() + " is not a summary table");
  std::vector<SummaryCsvRow> out;
  for (const auto& row : t.rows) {
    out.push_back({row[*p], csv::parse_double(row[*m]).value_or(NAN), csv::parse_double(row[*s]).value_or(NAN),
                   csv::parse_double(row[*lo]).value_or(NAN), csv::parse_double(row[*hi]).value_or(NAN)});
  }
  return out;
}

// ---------------------------------------------------------------------------

inline void write_waic_pointwise_csv(std::ostream& out, const WaicResult& w) {
  out << "cell,lppd,p_waic,elpd\n";
  for (std::size_t i = 0; i < w.pointwise.size(); ++i) {
    out << csv::join({w.cell_keys[i], csv::format_double(w.pointwise_lppd[i]), csv::format_double(w.pointwise_p[i]),
                      csv::format_double(w.pointwise[i])})
        << '\n';
  }
}

inline WaicResult read_waic_pointwise_csv(const std::filesystem::path& path, const std::string& model,
                                          std::size_t draws) {
  const csv::Table t = csv::read_table(path);
  const auto c = t.column("cell"), l = t.column("lppd"), p = t.column("p_waic");
  if (!c || !l || !p) throw InputError(path.string() + " is not a pointwise WAIC table");
  std::vector<std::string> keys;
  std::vector<double> lppd, pw;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    keys.push_back(t.rows[r][*c]);
    const auto a = csv::parse_double(t.rows[r][*l]);
    const auto b = csv::parse_double(t.rows[r][*p]);
    if (!a || !b) throw InputError("non-numeric WAIC entry at line " + std::to_string(t.line_numbers[r]));
    lppd.push_back(*a);
    pw.push_back(*b);
  }
  if (keys.empty()) throw InputError(path.string() + " has no cells");
  return detail::finish_waic(model, std::move(keys), std::move(lppd), std::move(pw), draws);
}

}  // namespace hieval::io
