#pragma once

// Evaluation records and their aggregation into binomial cells.
//
// One EvalRecord is one scored repeat of one item. Records are grouped on a
// list of factors into cells holding (successes k, trials n) plus any
// covariates that are constant within the cell.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hieval/csv.hpp"
#include "hieval/error.hpp"

namespace hieval {

enum class ReasoningEffort { none = 0, low = 1, intermediate = 2, high = 3 };

inline std::string_view to_string(ReasoningEffort r) {
  switch (r) {
    case ReasoningEffort::none: return "none";
    case ReasoningEffort::low: return "low";
    case ReasoningEffort::intermediate: return "intermediate";
    case ReasoningEffort::high: return "high";
  }
  return "none";
}

inline std::optional<ReasoningEffort> parse_reasoning_effort(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "none") return ReasoningEffort::none;
  if (lower == "low") return ReasoningEffort::low;
  if (lower == "intermediate") return ReasoningEffort::intermediate;
  if (lower == "high") return ReasoningEffort::high;
  return std::nullopt;
}

struct EvalRecord {
  std::string model;
  std::optional<std::string> domain;
  std::optional<std::string> subdomain;
  std::optional<std::string> task;
  int repeat = 1;
  std::optional<std::string> difficulty;
  std::optional<ReasoningEffort> reasoning_effort;
  int score = 0;
  // Columns outside the known schema, in file order.
  std::vector<std::pair<std::string, std::string>> extra;
};

/// Label of a named factor on a record, if present.
inline std::optional<std::string> factor_value(const EvalRecord& r, std::string_view name) {
  if (name == "model") return r.model;
  if (name == "domain") return r.domain;
  if (name == "subdomain") return r.subdomain;
  if (name == "task") return r.task;
  if (name == "difficulty") return r.difficulty;
  if (name == "reasoning_effort") {
    if (!r.reasoning_effort) return std::nullopt;
    return std::string(to_string(*r.reasoning_effort));
  }
  if (name == "repeat") return std::to_string(r.repeat);
  for (const auto& [key, value] : r.extra) {
    if (key == name) {
      if (value.empty()) return std::nullopt;
      return value;
    }
  }
  return std::nullopt;
}

/// Numeric covariate of a record. `reasoning` (or `reasoning_effort`) is the
/// ordinal code none=0, low=1, intermediate=2, high=3.
inline std::optional<double> covariate_value(const EvalRecord& r, std::string_view name) {
  if (name == "reasoning" || name == "reasoning_effort") {
    if (!r.reasoning_effort) return std::nullopt;
    return static_cast<double>(static_cast<int>(*r.reasoning_effort));
  }
  for (const auto& [key, value] : r.extra) {
    if (key == name) return csv::parse_double(value);
  }
  return std::nullopt;
}

enum class RecordFormat { csv, jsonl };

inline RecordFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return RecordFormat::jsonl;
  return RecordFormat::csv;
}

namespace detail {

inline int parse_score(std::string_view text, std::size_t line) {
  const auto v = csv::parse_double(text);
  if (!v || (*v != 0.0 && *v != 1.0)) {
    throw InputError("non-binary score at line " + std::to_string(line));
  }
  return *v == 1.0 ? 1 : 0;
}

inline int parse_repeat(std::string_view text, std::size_t line) {
  const auto v = csv::parse_double(text);
  if (!v || *v < 1.0 || *v != static_cast<double>(static_cast<long long>(*v))) {
    throw InputError("repeat must be an integer >= 1 at line " + std::to_string(line));
  }
  return static_cast<int>(*v);
}

inline void set_field(EvalRecord& rec, const std::string& key, const std::string& value, std::size_t line,
                      bool& have_model, bool& have_score) {
  auto opt = [&]() -> std::optional<std::string> {
    if (value.empty()) return std::nullopt;
    return value;
  };
  if (key == "model") {
    if (value.empty()) throw InputError("empty model label at line " + std::to_string(line));
    rec.model = value;
    have_model = true;
  } else if (key == "score") {
    rec.score = parse_score(value, line);
    have_score = true;
  } else if (key == "domain") {
    rec.domain = opt();
  } else if (key == "subdomain") {
    rec.subdomain = opt();
  } else if (key == "task") {
    rec.task = opt();
  } else if (key == "difficulty") {
    rec.difficulty = opt();
  } else if (key == "repeat") {
    if (!value.empty()) rec.repeat = parse_repeat(value, line);
  } else if (key == "reasoning_effort") {
    if (!value.empty()) {
      rec.reasoning_effort = parse_reasoning_effort(value);
      if (!rec.reasoning_effort) {
        throw InputError("unknown reasoning_effort '" + value + "' at line " + std::to_string(line) +
                         " (expected none, low, intermediate or high)");
      }
    }
  } else {
    rec.extra.emplace_back(key, value);
  }
}

inline std::vector<EvalRecord> load_csv(std::istream& in) {
  const csv::Table table = csv::read_table(in);
  if (!table.column("model")) throw InputError("missing required column 'model'");
  if (!table.column("score")) throw InputError("missing required column 'score'");
  std::vector<EvalRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    EvalRecord rec;
    bool have_model = false, have_score = false;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      set_field(rec, table.header[c], table.rows[r][c], table.line_numbers[r], have_model, have_score);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return csv::format_double(v.get<double>());
  return v.dump();
}

inline std::vector<EvalRecord> load_jsonl(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw InputError("unparsable JSON at line " + std::to_string(line_no));
    }
    if (!obj.is_object()) throw InputError("expected a JSON object at line " + std::to_string(line_no));
    if (!obj.contains("model")) throw InputError("missing required key 'model' at line " + std::to_string(line_no));
    if (!obj.contains("score")) throw InputError("missing required key 'score' at line " + std::to_string(line_no));
    EvalRecord rec;
    bool have_model = false, have_score = false;
    for (const auto& [key, value] : obj.items()) {
      set_field(rec, key, json_scalar_to_string(value), line_no, have_model, have_score);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

inline std::vector<EvalRecord> load_records(std::istream& in, RecordFormat format) {
  return format == RecordFormat::csv ? detail::load_csv(in) : detail::load_jsonl(in);
}

inline std::vector<EvalRecord> load_records(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return load_records(in, format);
}

inline std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  return load_records(path, format_from_path(path));
}

/// Records in the known schema plus extras, as CSV (inverse of load_records).
inline void write_records_csv(std::ostream& out, const std::vector<EvalRecord>& records) {
  std::vector<std::string> extra_names;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.extra) {
      if (std::find(extra_names.begin(), extra_names.end(), k) == extra_names.end()) extra_names.push_back(k);
    }
  }
  std::vector<std::string> header = {"model", "domain", "subdomain", "task", "repeat",
                                     "difficulty", "reasoning_effort", "score"};
  header.insert(header.end(), extra_names.begin(), extra_names.end());
  out << csv::join(header) << '\n';
  for (const auto& r : records) {
    std::vector<std::string> row = {r.model,
                                    r.domain.value_or(""),
                                    r.subdomain.value_or(""),
                                    r.task.value_or(""),
                                    std::to_string(r.repeat),
                                    r.difficulty.value_or(""),
                                    r.reasoning_effort ? std::string(to_string(*r.reasoning_effort)) : "",
                                    std::to_string(r.score)};
    for (const auto& name : extra_names) {
      std::string v;
      for (const auto& [k, val] : r.extra) {
        if (k == name) v = val;
      }
      row.push_back(v);
    }
    out << csv::join(row) << '\n';
  }
}

/// Keeps only records with repeat == 1, preserving order.
inline std::vector<EvalRecord> first_repeat_filter(const std::vector<EvalRecord>& records) {
  std::vector<EvalRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const EvalRecord& r) { return r.repeat == 1; });
  return out;
}

// ---------------------------------------------------------------------------

/// Labels of one factor, coded 0..levels-1 in first-appearance order.
class FactorIndex {
 public:
  FactorIndex() = default;
  explicit FactorIndex(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::vector<std::string>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }

  std::uint32_t add(const std::string& label) {
    auto [it, inserted] = codes_.try_emplace(label, static_cast<std::uint32_t>(levels_.size()));
    if (inserted) levels_.push_back(label);
    return it->second;
  }

  std::optional<std::uint32_t> code(const std::string& label) const {
    auto it = codes_.find(label);
    if (it == codes_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& label(std::uint32_t code) const { return levels_.at(code); }

  bool operator==(const FactorIndex& other) const { return name_ == other.name_ && levels_ == other.levels_; }

 private:
  std::string name_;
  std::vector<std::string> levels_;
  std::unordered_map<std::string, std::uint32_t> codes_;
};

struct Cell {
  std::vector<std::uint32_t> codes;
  std::int64_t successes = 0;
  std::int64_t trials = 0;
  std::vector<double> covariates;  // aligned with CellTable::covariate_names

  bool operator==(const Cell&) const = default;
};

struct CellTable {
  std::vector<FactorIndex> factors;
  std::vector<std::string> covariate_names;
  std::vector<Cell> cells;

  std::size_t size() const { return cells.size(); }
  bool empty() const { return cells.empty(); }

  std::optional<std::size_t> factor_position(std::string_view name) const {
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (factors[i].name() == name) return i;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> covariate_position(std::string_view name) const {
    for (std::size_t i = 0; i < covariate_names.size(); ++i) {
      if (covariate_names[i] == name) return i;
    }
    return std::nullopt;
  }

  /// Comma-joined factor labels identifying a cell across tables.
  std::string key(std::size_t i) const {
    std::string out;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      if (f) out.push_back(',');
      out += factors[f].label(cells[i].codes[f]);
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    out.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) out.push_back(key(i));
    return out;
  }

  std::int64_t total_trials() const {
    std::int64_t n = 0;
    for (const auto& c : cells) n += c.trials;
    return n;
  }

  std::int64_t total_successes() const {
    std::int64_t k = 0;
    for (const auto& c : cells) k += c.successes;
    return k;
  }

  bool operator==(const CellTable&) const = default;
};

namespace detail {
inline void sort_cells(CellTable& t) {
  std::sort(t.cells.begin(), t.cells.end(), [](const Cell& a, const Cell& b) { return a.codes < b.codes; });
}
}  // namespace detail

/// Groups records on `group_by` factors into (k, n) cells, sorted by code tuple.
inline CellTable aggregate_cells(const std::vector<EvalRecord>& records, const std::vector<std::string>& group_by,
                                 const std::vector<std::string>& covariate_names = {}) {
  CellTable table;
  for (const auto& name : group_by) table.factors.emplace_back(name);
  table.covariate_names = covariate_names;

  std::map<std::vector<std::uint32_t>, std::size_t> index;
  std::vector<std::uint32_t> codes(group_by.size());
  std::vector<double> covs(covariate_names.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const EvalRecord& rec = records[r];
    for (std::size_t f = 0; f < group_by.size(); ++f) {
      const auto label = factor_value(rec, group_by[f]);
      if (!label) {
        throw InputError("factor '" + group_by[f] + "' missing on record " + std::to_string(r + 1));
      }
      codes[f] = table.factors[f].add(*label);
    }
    for (std::size_t c = 0; c < covariate_names.size(); ++c) {
      const auto v = covariate_value(rec, covariate_names[c]);
      if (!v) {
        throw InputError("covariate '" + covariate_names[c] + "' missing or non-numeric on record " +
                         std::to_string(r + 1));
      }
      covs[c] = *v;
    }
    auto [it, inserted] = index.try_emplace(codes, table.cells.size());
    if (inserted) {
      table.cells.push_back(Cell{codes, 0, 0, covs});
    } else if (table.cells[it->second].covariates != covs) {
      throw InputError("covariate varies within a cell (record " + std::to_string(r + 1) + ")");
    }
    Cell& cell = table.cells[it->second];
    cell.successes += rec.score;
    cell.trials += 1;
  }
  detail::sort_cells(table);
  return table;
}

/// Relabels every factor so level codes follow lexicographic label order and
/// re-sorts cells. Two tables built from permutations of the same records are
/// equal after canonicalization.
inline CellTable canonicalize(const CellTable& in) {
  CellTable out;
  out.covariate_names = in.covariate_names;
  std::vector<std::vector<std::uint32_t>> remap(in.factors.size());
  for (std::size_t f = 0; f < in.factors.size(); ++f) {
    std::vector<std::string> sorted = in.factors[f].levels();
    std::sort(sorted.begin(), sorted.end());
    FactorIndex idx(in.factors[f].name());
    for (const auto& l : sorted) idx.add(l);
    remap[f].resize(in.factors[f].size());
    for (std::uint32_t c = 0; c < in.factors[f].size(); ++c) remap[f][c] = *idx.code(in.factors[f].label(c));
    out.factors.push_back(std::move(idx));
  }
  out.cells = in.cells;
  for (auto& cell : out.cells) {
    for (std::size_t f = 0; f < cell.codes.size(); ++f) cell.codes[f] = remap[f][cell.codes[f]];
  }
  detail::sort_cells(out);
  return out;
}

/// Canonical export: `factor...,k,n,covariate...`, one row per cell.
inline void write_cells_csv(std::ostream& out, const CellTable& t) {
  std::vector<std::string> header;
  for (const auto& f : t.factors) header.push_back(f.name());
  header.push_back("k");
  header.push_back("n");
  header.insert(header.end(), t.covariate_names.begin(), t.covariate_names.end());
  out << csv::join(header) << '\n';
  for (const auto& cell : t.cells) {
    std::vector<std::string> row;
    for (std::size_t f = 0; f < t.factors.size(); ++f) row.push_back(t.factors[f].label(cell.codes[f]));
    row.push_back(std::to_string(cell.successes));
    row.push_back(std::to_string(cell.trials));
    for (double v : cell.covariates) row.push_back(csv::format_double(v));
    out << csv::join(row) << '\n';
  }
}

/// Reads a canonical cell export. Cells keep file order; factor codes follow
/// first appearance in the file.
inline CellTable read_cells_csv(std::istream& in) {
  const csv::Table table = csv::read_table(in);
  const auto k_col = table.column("k");
  const auto n_col = table.column("n");
  if (!k_col || !n_col || *n_col != *k_col + 1) throw InputError("cell table needs adjacent 'k,n' columns");
  CellTable t;
  for (std::size_t c = 0; c < *k_col; ++c) t.factors.emplace_back(table.header[c]);
  for (std::size_t c = *n_col + 1; c < table.header.size(); ++c) t.covariate_names.push_back(table.header[c]);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Cell cell;
    for (std::size_t c = 0; c < *k_col; ++c) cell.codes.push_back(t.factors[c].add(row[c]));
    const auto k = csv::parse_double(row[*k_col]);
    const auto n = csv::parse_double(row[*n_col]);
    if (!k || !n || *n < 1 || *k < 0 || *k > *n) {
      throw InputError("invalid k/n at line " + std::to_string(table.line_numbers[r]));
    }
    cell.successes = static_cast<std::int64_t>(*k);
    cell.trials = static_cast<std::int64_t>(*n);
    for (std::size_t c = *n_col + 1; c < row.size(); ++c) {
      const auto v = csv::parse_double(row[c]);
      if (!v) throw InputError("non-numeric covariate at line " + std::to_string(table.line_numbers[r]));
      cell.covariates.push_back(*v);
    }
    t.cells.push_back(std::move(cell));
  }
  return t;
}

}  // namespace hieval
