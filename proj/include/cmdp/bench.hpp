#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmdp/algce.hpp"
#include "cmdp/core.hpp"
#include "cmdp/env.hpp"

namespace cmdp::bench {

enum class ExperimentKind { RegretVsT, RegretVsLambda, LowerBound, Properties };

std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::RegretVsT;
  int n = 10;
  int k = 10;
  int m = 2;
  int m0 = 2;
  double eps = 0.3;
  std::vector<std::int64_t> t_grid{1000, 5000, 10000};
  std::vector<int> m_grid{2, 4, 6, 8};
  std::int64_t T = 10000;  // fixed horizon for regret-vs-lambda / lower-bound
  int replications = 200;
  std::uint64_t base_seed = 1;
  double solver_tol = 1e-4;
  std::string out_path = "results.csv";
  int workers = 0;     // 0 = all available; 1 = serial reference path
  bool timing = false; // measured walltime breaks byte-determinism, off by default

  void validate() const;
};

// Desk-scale defaults per experiment; full_scale switches to the large
// parameterization described in the README.
ExperimentConfig default_config(ExperimentKind kind, bool full_scale = false);

// Flat key=value text; unknown keys are errors.
ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

struct ResultRow {
  std::string experiment;
  std::string algorithm;  // "alg-ce" or "alg-ue"
  std::int64_t T = 0;
  double lambda = 0.0;
  int m = 0;
  std::uint64_t seed = 0;
  double regret = 0.0;
  double walltime_ms = 0.0;
  bool e1 = false, e2 = false, e3 = false, e4 = false, e5 = false;
  double lambda_hat = 0.0;
};

// base_seed XOR a stable 64-bit hash of (experiment, grid value, replication,
// algorithm); replications line up across algorithms and grid points.
std::uint64_t derive_seed(std::uint64_t base_seed, ExperimentKind kind, std::int64_t grid_value,
                          int replication, const std::string& algorithm);

std::string csv_header();
std::string csv_row(const ResultRow& row, bool timing);
void write_csv(const std::string& path, const std::vector<ResultRow>& rows, bool timing);

std::vector<ResultRow> run_regret_vs_T(const ExperimentConfig& cfg);
std::vector<ResultRow> run_regret_vs_lambda(const ExperimentConfig& cfg);
std::vector<ResultRow> run_lower_bound_sanity(const ExperimentConfig& cfg);

// Per-(algorithm, grid value) mean / standard error table plus, for the
// lower-bound experiment, the sqrt(sum m / T) context value.
void print_summary(std::ostream& os, const ExperimentConfig& cfg,
                   const std::vector<ResultRow>& rows);

struct PropertyReport {
  struct Item {
    std::string name;
    bool pass = false;
    std::string detail;
  };
  std::vector<Item> items;
  bool all_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
};

// Appendix checks: the KL upper bound on its beta grid, chord convexity of
// the min-max objective, the closed-form lambda on deterministic matrices,
// and the lattice form of the simplex lower bound.
PropertyReport run_property_suite();

// Internal replication machinery, exposed so tests and the benchmark tool
// can compare the serial reference against the OpenMP path.
struct ReplicationJob {
  const Instance* instance = nullptr;
  ExperimentKind kind = ExperimentKind::RegretVsT;
  std::string algorithm;
  std::int64_t T = 0;
  double lambda = 0.0;
  int m = 0;
  std::uint64_t seed = 0;
  double solver_tol = 1e-4;
};

ResultRow execute_job(const ReplicationJob& job);
std::vector<ResultRow> run_jobs_serial(const std::vector<ReplicationJob>& jobs);
std::vector<ResultRow> run_jobs_parallel(const std::vector<ReplicationJob>& jobs, int workers);

}  // namespace cmdp::bench
