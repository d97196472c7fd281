#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hieval/hieval.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return HIEVAL_DATA_DIR; }

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("hieval-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) { return hieval::io::read_file(p); }

inline hieval::CellTable cells_from_csv(const std::string& csv, const std::vector<std::string>& group_by,
                                        const std::vector<std::string>& covariates = {}) {
  std::istringstream in(csv);
  return hieval::canonicalize(hieval::aggregate_cells(hieval::load_records(in, hieval::RecordFormat::csv), group_by, covariates));
}

/// Records for one (model, domain) pair: k successes out of n trials.
inline void add_trials(std::vector<hieval::EvalRecord>& out, const std::string& model, const std::string& domain,
                       int k, int n) {
  for (int i = 0; i < n; ++i) {
    hieval::EvalRecord r;
    r.model = model;
    r.domain = domain;
    r.task = domain + "-" + std::to_string(i);
    r.score = i < k ? 1 : 0;
    out.push_back(std::move(r));
  }
}

/// Small random cell table fitting `spec`: every factor gets 2-3 labels.
inline hieval::CellTable random_cells(const hieval::ModelSpec& spec, std::mt19937_64& rng, std::size_t max_cells = 50) {
  std::vector<std::string> factors = spec.factors();
  const auto covs = spec.covariates();
  if (!covs.empty() && std::find(factors.begin(), factors.end(), "reasoning_effort") == factors.end()) {
    factors.push_back("reasoning_effort");
  }
  std::uniform_int_distribution<int> labels(2, 3);
  std::vector<int> counts;
  for (std::size_t f = 0; f < factors.size(); ++f) counts.push_back(factors[f] == "reasoning_effort" ? 4 : labels(rng));
  std::vector<hieval::EvalRecord> records;
  std::uniform_int_distribution<int> trials(1, 12);
  std::uniform_real_distribution<double> rate(0.05, 0.95);
  std::size_t made = 0;
  std::vector<int> idx(factors.size(), 0);
  while (made < max_cells) {
    hieval::EvalRecord proto;
    proto.model = "m0";
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const std::string label = factors[f].substr(0, 2) + std::to_string(idx[f]);
      if (factors[f] == "reasoning_effort") {
        proto.reasoning_effort = static_cast<hieval::ReasoningEffort>(idx[f]);
      } else if (factors[f] == "model") {
        proto.model = label;
      } else if (factors[f] == "domain") {
        proto.domain = label;
      } else if (factors[f] == "subdomain") {
        proto.subdomain = label;
      } else if (factors[f] == "task") {
        proto.task = label;
      } else if (factors[f] == "difficulty") {
        proto.difficulty = label;
      }
    }
    const int n = trials(rng);
    std::bernoulli_distribution hit(rate(rng));
    for (int t = 0; t < n; ++t) {
      hieval::EvalRecord r = proto;
      r.repeat = t + 1;
      r.score = hit(rng) ? 1 : 0;
      records.push_back(r);
    }
    ++made;
    std::size_t f = 0;
    for (; f < factors.size(); ++f) {
      if (++idx[f] < counts[f]) break;
      idx[f] = 0;
    }
    if (f == factors.size()) break;
  }
  return hieval::canonicalize(hieval::aggregate_cells(records, factors, covs));
}

inline std::vector<double> random_point(std::size_t dim, std::mt19937_64& rng, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> x(dim);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace testing_support
