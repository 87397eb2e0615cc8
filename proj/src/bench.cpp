#include "cmdp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cmdp/opt.hpp"

namespace cmdp::bench {

namespace {

std::string format10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::uint64_t hash_string(const std::string& s) {
  // FNV-1a, stable across platforms.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::int64_t> parse_int_list(const std::string& value, const std::string& key) {
  std::vector<std::int64_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoll(item));
    } catch (const std::exception&) {
      throw ParseError("config: bad integer '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw ParseError("config: empty list for " + key);
  return out;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::RegretVsT: return "regret-vs-t";
    case ExperimentKind::RegretVsLambda: return "regret-vs-lambda";
    case ExperimentKind::LowerBound: return "lower-bound";
    case ExperimentKind::Properties: return "properties";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("config: replications must be >= 1");
  if (t_grid.empty() || m_grid.empty()) throw std::invalid_argument("config: empty grid");
  if (!(solver_tol > 0.0)) throw std::invalid_argument("config: solver_tol must be positive");
  if (workers < 0) throw std::invalid_argument("config: workers must be >= 0");
  if (kind == ExperimentKind::RegretVsLambda)
    for (int mi : m_grid)
      if (mi < 2 || mi > n) throw std::invalid_argument("config: m_grid entries must lie in [2, n]");
  if (kind == ExperimentKind::LowerBound && k <= 1)
    throw std::invalid_argument("config: lower-bound requires k > 1");
}

ExperimentConfig default_config(ExperimentKind kind, bool full_scale) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  if (kind == ExperimentKind::LowerBound) {
    cfg.k = 4;
    cfg.T = 5000;
    cfg.replications = 10;
  }
  if (full_scale) {
    switch (kind) {
      case ExperimentKind::RegretVsT:
        cfg.n = cfg.k = 25;
        cfg.t_grid = {1000, 5000, 10000, 15000, 20000, 25000};
        cfg.replications = 10000;
        break;
      case ExperimentKind::RegretVsLambda:
        cfg.n = cfg.k = 25;
        cfg.m_grid.clear();
        for (int m = 2; m <= 25; ++m) cfg.m_grid.push_back(m);
        cfg.T = 25000;
        cfg.replications = 10000;
        break;
      case ExperimentKind::LowerBound:
        cfg.k = 10;
        cfg.T = 25000;
        cfg.replications = 100;
        break;
      case ExperimentKind::Properties:
        break;
    }
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "experiment") {
        if (value == "regret-vs-t") cfg.kind = ExperimentKind::RegretVsT;
        else if (value == "regret-vs-lambda") cfg.kind = ExperimentKind::RegretVsLambda;
        else if (value == "lower-bound") cfg.kind = ExperimentKind::LowerBound;
        else if (value == "properties") cfg.kind = ExperimentKind::Properties;
        else throw ParseError("config: unknown experiment '" + value + "'");
      } else if (key == "n") cfg.n = std::stoi(value);
      else if (key == "k") cfg.k = std::stoi(value);
      else if (key == "m") cfg.m = std::stoi(value);
      else if (key == "m0") cfg.m0 = std::stoi(value);
      else if (key == "eps") cfg.eps = std::stod(value);
      else if (key == "t_grid") cfg.t_grid = parse_int_list(value, key);
      else if (key == "m_grid") {
        cfg.m_grid.clear();
        for (std::int64_t v : parse_int_list(value, key)) cfg.m_grid.push_back(static_cast<int>(v));
      } else if (key == "T") cfg.T = std::stoll(value);
      else if (key == "replications") cfg.replications = std::stoi(value);
      else if (key == "base_seed") cfg.base_seed = std::stoull(value);
      else if (key == "solver_tol") cfg.solver_tol = std::stod(value);
      else if (key == "out") cfg.out_path = value;
      else if (key == "workers") cfg.workers = std::stoi(value);
      else throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::uint64_t derive_seed(std::uint64_t base_seed, ExperimentKind kind, std::int64_t grid_value,
                          int replication, const std::string& algorithm) {
  std::uint64_t h = hash_string(to_string(kind));
  h = detail::mix64(h, static_cast<std::uint64_t>(grid_value));
  h = detail::mix64(h, static_cast<std::uint64_t>(replication));
  h = detail::mix64(h, hash_string(algorithm));
  return base_seed ^ h;
}

std::string csv_header() {
  return "experiment,algorithm,T,lambda,m,seed,regret,walltime_ms,e1,e2,e3,e4,e5,lambda_hat";
}

std::string csv_row(const ResultRow& r, bool timing) {
  std::ostringstream os;
  os << r.experiment << ',' << r.algorithm << ',' << r.T << ',' << format10(r.lambda) << ','
     << r.m << ',' << r.seed << ',' << format10(r.regret) << ','
     << format10(timing ? r.walltime_ms : 0.0) << ',' << int(r.e1) << ',' << int(r.e2) << ','
     << int(r.e3) << ',' << int(r.e4) << ',' << int(r.e5) << ',' << format10(r.lambda_hat);
  return os.str();
}

void write_csv(const std::string& path, const std::vector<ResultRow>& rows, bool timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_row(r, timing) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

ResultRow execute_job(const ReplicationJob& job) {
  const auto start = std::chrono::steady_clock::now();
  RandomStream rng(job.seed);
  RunResult run;
  if (job.algorithm == "alg-ce") {
    SolveOptions opts;
    opts.tol = job.solver_tol;
    opts.max_iters = 60000;
    run = run_alg_ce(*job.instance, job.T, opts, rng);
  } else {
    run = run_alg_ue(*job.instance, job.T, rng);
  }
  ResultRow row;
  row.experiment = to_string(job.kind);
  row.algorithm = job.algorithm;
  row.T = job.T;
  row.lambda = job.lambda;
  row.m = job.m;
  row.seed = job.seed;
  row.regret = simple_regret(*job.instance, run.policy);
  row.e1 = run.diagnostics.e1;
  row.e2 = run.diagnostics.e2;
  row.e3 = run.diagnostics.e3;
  row.e4 = run.diagnostics.e4;
  row.e5 = run.diagnostics.e5;
  row.lambda_hat = run.diagnostics.lambda_hat;
  row.walltime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<ResultRow> run_jobs_serial(const std::vector<ReplicationJob>& jobs) {
  std::vector<ResultRow> rows(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) rows[i] = execute_job(jobs[i]);
  return rows;
}

std::vector<ResultRow> run_jobs_parallel(const std::vector<ReplicationJob>& jobs, int workers) {
  if (workers == 1) return run_jobs_serial(jobs);
  std::vector<ResultRow> rows(jobs.size());
#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(jobs.size()); ++i)
    rows[static_cast<std::size_t>(i)] = execute_job(jobs[static_cast<std::size_t>(i)]);
#else
  (void)workers;
  for (std::size_t i = 0; i < jobs.size(); ++i) rows[i] = execute_job(jobs[i]);
#endif
  return rows;
}

namespace {

// Output order is fixed regardless of scheduling.
void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.experiment != b.experiment) return a.experiment < b.experiment;
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.T != b.T) return a.T < b.T;
    if (a.m != b.m) return a.m < b.m;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.seed < b.seed;
  });
}

std::vector<double> true_m_vector(const Instance& inst) {
  std::vector<double> m(static_cast<std::size_t>(inst.k()));
  for (int i = 1; i <= inst.k(); ++i)
    m[static_cast<std::size_t>(i - 1)] = static_cast<double>(true_m(inst.mid(i).q).m);
  return m;
}

}  // namespace

std::vector<ResultRow> run_regret_vs_T(const ExperimentConfig& cfg) {
  cfg.validate();
  const Instance inst = make_experiment_instance(cfg.n, cfg.k, cfg.m, cfg.m0, cfg.eps);
  const double lambda = lambda_of(inst.transitions(), true_m_vector(inst)).first;

  std::vector<ReplicationJob> jobs;
  for (std::int64_t T : cfg.t_grid)
    for (int rep = 0; rep < cfg.replications; ++rep)
      for (const char* alg : {"alg-ce", "alg-ue"}) {
        ReplicationJob job;
        job.instance = &inst;
        job.kind = cfg.kind;
        job.algorithm = alg;
        job.T = T;
        job.lambda = lambda;
        job.m = cfg.m;
        job.seed = derive_seed(cfg.base_seed, cfg.kind, T, rep, alg);
        job.solver_tol = cfg.solver_tol;
        jobs.push_back(std::move(job));
      }
  auto rows = run_jobs_parallel(jobs, cfg.workers);
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_regret_vs_lambda(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  std::vector<Instance> instances;
  instances.reserve(cfg.m_grid.size());
  std::vector<double> lambdas;
  for (int m : cfg.m_grid) {
    instances.push_back(make_experiment_instance(cfg.n, cfg.k, m, cfg.m0, cfg.eps));
    lambdas.push_back(lambda_of(instances.back().transitions(), true_m_vector(instances.back())).first);
  }
  std::vector<ReplicationJob> jobs;
  for (std::size_t gi = 0; gi < instances.size(); ++gi)
    for (int rep = 0; rep < cfg.replications; ++rep)
      for (const char* alg : {"alg-ce", "alg-ue"}) {
        ReplicationJob job;
        job.instance = &instances[gi];
        job.kind = cfg.kind;
        job.algorithm = alg;
        job.T = cfg.T;
        job.lambda = lambdas[gi];
        job.m = cfg.m_grid[gi];
        job.seed = derive_seed(cfg.base_seed, cfg.kind, cfg.m_grid[gi], rep, alg);
        job.solver_tol = cfg.solver_tol;
        jobs.push_back(std::move(job));
      }
  rows = run_jobs_parallel(jobs, cfg.workers);
  sort_rows(rows);
  return rows;
}

std::vector<ResultRow> run_lower_bound_sanity(const ExperimentConfig& cfg) {
  cfg.validate();
  const int k = cfg.k;
  const int n = k - 1;
  const int N = num_interventions(n);
  // All intermediate q are zero, so every m_l = n and sum m = k n.
  const double sum_m = static_cast<double>(k) * static_cast<double>(n);
  const double beta = lower_bound_beta(sum_m, static_cast<double>(cfg.T));

  const auto order = canonical_intervention_order(n);
  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(N));
  for (int i = 1; i <= k; ++i)
    for (const auto& a : order)
      instances.push_back(make_lower_bound_instance(k, std::make_pair(i, a), beta));

  const double lambda = lambda_of(instances.front().transitions(), true_m_vector(instances.front())).first;

  std::vector<ReplicationJob> jobs;
  for (std::size_t ti = 0; ti < instances.size(); ++ti)
    for (int rep = 0; rep < cfg.replications; ++rep) {
      ReplicationJob job;
      job.instance = &instances[ti];
      job.kind = cfg.kind;
      job.algorithm = "alg-ce";
      job.T = cfg.T;
      job.lambda = lambda;
      job.m = n;
      job.seed = derive_seed(cfg.base_seed, cfg.kind, static_cast<std::int64_t>(ti), rep, "alg-ce");
      job.solver_tol = cfg.solver_tol;
      jobs.push_back(std::move(job));
    }
  auto rows = run_jobs_parallel(jobs, cfg.workers);
  sort_rows(rows);
  return rows;
}

void print_summary(std::ostream& os, const ExperimentConfig& cfg,
                   const std::vector<ResultRow>& rows) {
  struct Cell {
    double sum = 0.0, sum_sq = 0.0, wall = 0.0;
    int count = 0;
    int good = 0;
  };
  std::map<std::pair<std::string, std::pair<std::int64_t, double>>, Cell> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.algorithm, {r.T, r.lambda}}];
    c.sum += r.regret;
    c.sum_sq += r.regret * r.regret;
    c.wall += r.walltime_ms;
    c.count += 1;
    c.good += (r.e1 && r.e2 && r.e3 && r.e4 && r.e5) ? 1 : 0;
  }
  os << "experiment " << to_string(cfg.kind) << "  (replications per cell vary by grid)\n";
  os << "algorithm      T        lambda      mean_regret  std_err      good_event  mean_ms\n";
  for (const auto& [key, c] : cells) {
    const double mean = c.sum / c.count;
    const double var = std::max(c.sum_sq / c.count - mean * mean, 0.0);
    const double se = c.count > 1 ? std::sqrt(var / (c.count - 1)) : 0.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %8lld %11.5g %12.6f %12.6f %10.3f %9.2f\n",
                  key.first.c_str(), static_cast<long long>(key.second.first), key.second.second,
                  mean, se, static_cast<double>(c.good) / c.count, c.wall / c.count);
    os << buf;
  }
  if (cfg.kind == ExperimentKind::LowerBound) {
    const double sum_m = static_cast<double>(cfg.k) * static_cast<double>(cfg.k - 1);
    os << "context: sqrt(sum m / T) = " << format10(std::sqrt(sum_m / static_cast<double>(cfg.T)))
       << " (worst-case scale; not a pass/fail bound)\n";
  }
}

PropertyReport run_property_suite() {
  PropertyReport report;

  // KL(1/2 || 1/2 + beta) = -1/2 log2(1 - 4 beta^2), nonnegative and at most
  // 6 beta^2 across the full beta grid.
  {
    bool pass = true;
    std::string detail;
    for (int j = 1; j <= 333; ++j) {
      const double beta = 0.001 * j;
      const double kl = -0.5 * std::log2(1.0 - 4.0 * beta * beta);
      if (!(kl >= 0.0) || kl > 6.0 * beta * beta * (1.0 + 1e-12) + 1e-15) {
        pass = false;
        detail = "failed at beta = " + format10(beta) + ", kl = " + format10(kl);
        break;
      }
    }
    report.items.push_back({"kl-upper-bound", pass, detail});
  }

  // Chord convexity of the min-max objective on random problems.
  {
    RandomStream rng(0x9e3779b97f4a7c15ULL);
    bool pass = true;
    std::string detail;
    for (int p = 0; p < 50 && pass; ++p) {
      const std::size_t k = 2 + rng.below(4);
      const std::size_t N = k + 1 + rng.below(5);
      Matrix P(N, k);
      for (std::size_t r = 0; r < N; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          P(r, c) = 0.05 + rng.uniform01();
          sum += P(r, c);
        }
        for (std::size_t c = 0; c < k; ++c) P(r, c) /= sum;
      }
      std::vector<double> m(k);
      for (auto& mi : m) mi = 1.0 + 3.0 * rng.uniform01();
      RandomStream trial_rng = rng.split(static_cast<std::uint64_t>(p));
      if (!convexity_chord_check({P, m}, 200, trial_rng)) {
        pass = false;
        detail = "chord violated on random problem " + std::to_string(p);
      }
    }
    report.items.push_back({"objective-convexity", pass, detail});
  }

  // Closed-form lambda on deterministic matrices: solver matches sum m.
  {
    RandomStream rng(0x243f6a8885a308d3ULL);
    bool pass = true;
    std::string detail;
    for (int trial = 0; trial < 20 && pass; ++trial) {
      const int k = 2 + static_cast<int>(rng.below(5));
      const int n = k - 1;
      const int N = num_interventions(n);
      Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k), 0.0);
      for (int r = 0; r < N; ++r) P(static_cast<std::size_t>(r), static_cast<std::size_t>(k - 1)) = 1.0;
      for (int i = 1; i <= n; ++i) {
        const auto r1 = static_cast<std::size_t>(intervention_index(Intervention::set(i, 1)));
        P(r1, static_cast<std::size_t>(k - 1)) = 0.0;
        P(r1, static_cast<std::size_t>(i - 1)) = 1.0;
      }
      std::vector<double> m(static_cast<std::size_t>(k));
      double sum_m = 0.0;
      for (auto& mi : m) {
        mi = static_cast<double>(1 + rng.below(10));
        sum_m += mi;
      }
      const auto rep = solve_min_max({P, m});
      if (std::abs(rep.objective_squared - sum_m) > 1e-3) {
        pass = false;
        detail = "lambda " + format10(rep.objective_squared) + " vs sum m " + format10(sum_m);
      }
    }
    report.items.push_back({"deterministic-lambda-closed-form", pass, detail});
  }

  // Lattice form of min over the simplex of max m_l / rho_l >= sum m_l.
  {
    bool pass = true;
    std::string detail;
    const std::vector<std::vector<double>> m_sets = {{3, 5}, {1, 1, 1}, {2, 7, 4}, {8, 8, 8, 8}};
    for (const auto& m : m_sets) {
      const double sum_m = std::accumulate(m.begin(), m.end(), 0.0);
      const int steps = 100;
      double lattice_min = std::numeric_limits<double>::infinity();
      std::vector<int> parts(m.size(), 0);
      auto dfs = [&](auto&& self, std::size_t idx, int remaining) -> void {
        if (idx + 1 == m.size()) {
          parts[idx] = remaining;
          double worst = 0.0;
          for (std::size_t i = 0; i < m.size(); ++i) {
            if (parts[i] == 0) {
              worst = std::numeric_limits<double>::infinity();
              break;
            }
            worst = std::max(worst, m[i] * steps / static_cast<double>(parts[i]));
          }
          lattice_min = std::min(lattice_min, worst);
          return;
        }
        for (int u = 0; u <= remaining; ++u) {
          parts[idx] = u;
          self(self, idx + 1, remaining - u);
        }
      };
      dfs(dfs, 0, steps);
      if (!(lattice_min >= sum_m - 1e-9)) {
        pass = false;
        detail = "lattice min " + format10(lattice_min) + " below sum m " + format10(sum_m);
        break;
      }
    }
    report.items.push_back({"simplex-allocation-lower-bound", pass, detail});
  }

  return report;
}

}  // namespace cmdp::bench
