// Acceptance suite: one line per criterion, nonzero exit if any fail.
// Criterion 8 is a loose calibration check on the good-event diagnostics at
// desk horizons; see the README section on diagnostics for how to read it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "cmdp/algce.hpp"
#include "cmdp/bench.hpp"
#include "cmdp/env.hpp"
#include "cmdp/opt.hpp"

using namespace cmdp;
using namespace cmdp::bench;

namespace {

using clock_type = std::chrono::steady_clock;

int failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] criterion %d: %-28s %s (%.1fs)\n", pass ? "PASS" : "FAIL", index, name,
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) failures += 1;
}

Matrix deterministic_matrix(int k) {
  const int n = k - 1;
  Matrix P(static_cast<std::size_t>(2 * n + 1), static_cast<std::size_t>(k), 0.0);
  for (std::size_t r = 0; r < P.rows(); ++r) P(r, static_cast<std::size_t>(k - 1)) = 1.0;
  for (int i = 1; i <= n; ++i) {
    const auto r1 = static_cast<std::size_t>(intervention_index(Intervention::set(i, 1)));
    P(r1, static_cast<std::size_t>(k - 1)) = 0.0;
    P(r1, static_cast<std::size_t>(i - 1)) = 1.0;
  }
  return P;
}

struct CellStats {
  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  double mean() const { return sum / count; }
  double se() const {
    const double v = std::max(sum_sq / count - mean() * mean(), 0.0);
    return count > 1 ? std::sqrt(v / (count - 1)) : 0.0;
  }
};

std::map<std::pair<std::string, std::int64_t>, CellStats> cell_stats(
    const std::vector<ResultRow>& rows, bool key_on_m) {
  std::map<std::pair<std::string, std::int64_t>, CellStats> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.algorithm, key_on_m ? r.m : r.T}];
    c.sum += r.regret;
    c.sum_sq += r.regret * r.regret;
    c.count += 1;
  }
  return cells;
}

void criterion_1() {
  const auto t0 = clock_type::now();
  RandomStream rng(0xC1);
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    Matrix P = deterministic_matrix(k);
    std::vector<double> m(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& mi : m) {
      mi = static_cast<double>(1 + rng.below(10));
      sum += mi;
    }
    const auto rep = solve_min_max({std::move(P), std::move(m)});
    worst = std::max(worst, std::abs(rep.objective_squared - sum));
  }
  pass = worst <= 1e-3;
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[128];
  std::snprintf(buf, sizeof(buf), "worst |lambda - sum m| = %.2e (limit 1e-3)", worst);
  report(1, "closed-form lambda", pass && secs < 30.0, buf, secs);
}

void criterion_2() {
  const auto t0 = clock_type::now();
  RandomStream rng(0xC2);
  double worst_over = 0.0, worst_under = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(3));
    const int C = 2 + static_cast<int>(rng.below(3));
    const int N = C + static_cast<int>(rng.below(5));
    std::vector<std::vector<double>> distinct;
    for (int c = 0; c < C; ++c) {
      std::vector<double> r(static_cast<std::size_t>(k));
      double s = 0.0;
      for (auto& x : r) {
        x = 0.05 + rng.uniform01();
        s += x;
      }
      for (auto& x : r) x /= s;
      distinct.push_back(std::move(r));
    }
    Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
    for (int a = 0; a < N; ++a) {
      const auto& r =
          distinct[static_cast<std::size_t>(a < C ? a : static_cast<int>(rng.below(static_cast<std::uint64_t>(C))))];
      for (int i = 0; i < k; ++i)
        P(static_cast<std::size_t>(a), static_cast<std::size_t>(i)) = r[static_cast<std::size_t>(i)];
    }
    std::vector<double> m(static_cast<std::size_t>(k));
    for (auto& mi : m) mi = 1.0 + 3.0 * rng.uniform01();

    const MinMaxProblem prob{std::move(P), std::move(m)};
    const auto rep = solve_min_max(prob);
    const auto oracle = grid_oracle(prob, 0.005);
    worst_over = std::max(worst_over, rep.objective_squared - oracle.value);
    worst_under = std::max(worst_under, (oracle.value - rep.objective_squared) / oracle.value);
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const bool pass = worst_over <= 1e-2 && worst_under <= 0.02 && secs < 120.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "worst over = %.2e (limit 1e-2), worst rel under = %.2e (limit 0.02)",
                worst_over, worst_under);
  report(2, "grid-oracle equivalence", pass, buf, secs);
}

void criterion_3() {
  const auto t0 = clock_type::now();
  RandomStream rng(0xC3);
  bool all = true;
  int checks = 0;
  for (int trial = 0; trial < 50 && all; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t N = k + 1 + rng.below(5);
    Matrix P(N, k);
    for (std::size_t r = 0; r < N; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        P(r, c) = 0.05 + rng.uniform01();
        s += P(r, c);
      }
      for (std::size_t c = 0; c < k; ++c) P(r, c) /= s;
    }
    std::vector<double> m(k);
    for (auto& mi : m) mi = 1.0 + 3.0 * rng.uniform01();
    RandomStream trial_rng = rng.split(static_cast<std::uint64_t>(trial));
    all = convexity_chord_check({std::move(P), std::move(m)}, 200, trial_rng);
    checks += 200;
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d chord checks, margin 1e-9", checks);
  report(3, "objective convexity", all && secs < 10.0, buf, secs);
}

void criterion_4() {
  const auto t0 = clock_type::now();
  bool pass = true;
  double worst_slack = 1.0;
  for (int j = 1; j <= 333; ++j) {
    const double beta = 0.001 * j;
    const double kl = -0.5 * std::log2(1.0 - 4.0 * beta * beta);
    if (!(kl >= 0.0) || kl > 6.0 * beta * beta * (1.0 + 1e-12) + 1e-15) pass = false;
    worst_slack = std::min(worst_slack, 6.0 * beta * beta - kl);
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "beta grid 0.001..0.333, min slack = %.2e", worst_slack);
  report(4, "kl inequality", pass && secs < 1.0, buf, secs);
}

// Shared by criteria 5, 8 and 9.
ExperimentConfig desk_fig3a_config() {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::RegretVsT;
  cfg.n = cfg.k = 10;
  cfg.m = cfg.m0 = 2;
  cfg.eps = 0.3;
  cfg.t_grid = {1000, 5000, 10000};
  cfg.replications = 200;
  cfg.base_seed = 20250801;
  cfg.solver_tol = 1e-4;
  cfg.workers = 0;
  return cfg;
}

std::vector<ResultRow> g_fig3a_rows;

void criterion_5() {
  const auto t0 = clock_type::now();
  const ExperimentConfig cfg = desk_fig3a_config();
  g_fig3a_rows = run_regret_vs_T(cfg);
  const auto cells = cell_stats(g_fig3a_rows, false);

  const CellStats ce_hi = cells.at({"alg-ce", 10000});
  const CellStats ue_hi = cells.at({"alg-ue", 10000});
  const CellStats ce_lo = cells.at({"alg-ce", 1000});
  const double pooled_se = std::sqrt(ce_hi.se() * ce_hi.se() + ue_hi.se() * ue_hi.se());

  const bool beats_ue = ce_hi.mean() < ue_hi.mean() - pooled_se;
  const bool improves = ce_hi.mean() < ce_lo.mean();
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "T=10000: ce %.5f vs ue %.5f (pooled se %.5f); ce at T=1000: %.5f",
                ce_hi.mean(), ue_hi.mean(), pooled_se, ce_lo.mean());
  report(5, "regret vs T ordering", beats_ue && improves, buf, secs);
}

void criterion_6() {
  const auto t0 = clock_type::now();
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::RegretVsLambda;
  cfg.n = cfg.k = 10;
  cfg.m0 = 2;
  cfg.eps = 0.3;
  cfg.m_grid = {2, 4, 6, 8};
  cfg.T = 10000;
  cfg.replications = 200;
  cfg.base_seed = 20250802;
  cfg.solver_tol = 1e-4;
  cfg.workers = 0;
  const auto rows = run_regret_vs_lambda(cfg);

  // Mean ALG-CE regret per lambda, in lambda order.
  std::map<double, CellStats> by_lambda;
  for (const auto& r : rows)
    if (r.algorithm == "alg-ce") {
      auto& c = by_lambda[r.lambda];
      c.sum += r.regret;
      c.sum_sq += r.regret * r.regret;
      c.count += 1;
    }
  std::vector<double> lambdas, means;
  for (const auto& [lam, c] : by_lambda) {
    lambdas.push_back(lam);
    means.push_back(c.mean());
  }
  // Spearman rank correlation: lambdas are already sorted, rank the means.
  const std::size_t n = means.size();
  std::vector<int> rank(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (means[j] < means[i] || (means[j] == means[i] && j < i)) rank[i] += 1;
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(rank[i]) - static_cast<double>(i);
    d2 += d * d;
  }
  const double rho = 1.0 - 6.0 * d2 / (static_cast<double>(n) * (static_cast<double>(n) * n - 1.0));

  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[200];
  std::snprintf(buf, sizeof(buf), "spearman(lambda, ce regret) = %.3f over lambda = {%g, %g, %g, %g}",
                rho, lambdas[0], lambdas[1], lambdas[2], lambdas[3]);
  report(6, "regret vs lambda trend", rho >= 0.8, buf, secs);
}

void criterion_7() {
  const auto t0 = clock_type::now();
  const Instance inst = make_experiment_instance(10, 10, 2, 2, 0.3);
  const int N = inst.num_interventions(), k = inst.k();
  SolveOptions opts;
  opts.tol = 1e-4;
  opts.max_iters = 60000;

  double p_err_sum = 0.0, r_err_sum = 0.0;
  bool m_exact = true;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    RandomStream rng(0xC7000 + static_cast<unsigned>(s));
    const RunResult run = run_alg_ce(inst, 3000000, opts, rng);  // 1e6 per subroutine
    double p_err = 0.0;
    for (int a = 0; a < N; ++a)
      for (int i = 0; i < k; ++i)
        p_err = std::max(p_err, std::abs(run.estimated.P_hat(static_cast<std::size_t>(a),
                                                             static_cast<std::size_t>(i)) -
                                         inst.transitions()(static_cast<std::size_t>(a),
                                                            static_cast<std::size_t>(i))));
    p_err_sum += p_err;
    for (int i = 1; i <= k; ++i)
      if (run.estimated.m_hat[static_cast<std::size_t>(i)] != 2) m_exact = false;
    double r_err = 0.0;
    const auto& counts = run.stage_counts[2];
    for (int i = 1; i <= k; ++i)
      for (int b = 0; b < N; ++b) {
        if (counts.reward_fallback[counts.cell(i, b)]) continue;
        const double truth = expected_reward(inst, i, inst.intervention_order()[static_cast<std::size_t>(b)]);
        r_err = std::max(r_err, std::abs(truth - run.estimated.R_hat(static_cast<std::size_t>(i - 1),
                                                                     static_cast<std::size_t>(b))));
      }
    r_err_sum += r_err;
  }
  const double p_err = p_err_sum / seeds, r_err = r_err_sum / seeds;
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean max|P err| = %.4f, m exact = %s, mean max|R err| = %.4f",
                p_err, m_exact ? "yes" : "no", r_err);
  report(7, "estimator consistency", p_err <= 0.02 && m_exact && r_err <= 0.02, buf, secs);
}

void criterion_8() {
  // Diagnostics on the criterion-5 runs at T = 10000 (ALG-CE rows).
  int bad = 0, total = 0;
  for (const auto& r : g_fig3a_rows) {
    if (r.algorithm != "alg-ce" || r.T != 10000) continue;
    total += 1;
    if (!(r.e1 && r.e2 && r.e3 && r.e4 && r.e5)) bad += 1;
  }
  const double freq = total > 0 ? static_cast<double>(bad) / total : 1.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "bad-event frequency %.3f over %d runs (limit 0.10)", freq, total);
  report(8, "good-event diagnostics", freq <= 0.10, buf, 0.0);
}

void criterion_9() {
  const auto t0 = clock_type::now();
  ExperimentConfig cfg = desk_fig3a_config();
  cfg.t_grid = {1000};
  const auto rows1 = run_regret_vs_T(cfg);
  const auto rows2 = run_regret_vs_T(cfg);
  std::string csv1 = csv_header() + "\n", csv2 = csv_header() + "\n";
  for (const auto& r : rows1) csv1 += csv_row(r, false) + "\n";
  for (const auto& r : rows2) csv2 += csv_row(r, false) + "\n";
  const bool identical = csv1 == csv2;
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu bytes, rerun %s", csv1.size(),
                identical ? "identical" : "DIFFERS");
  report(9, "byte determinism", identical, buf, secs);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
