#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cmdp/core.hpp"
#include "cmdp/env.hpp"
#include "cmdp/estimation.hpp"
#include "cmdp/opt.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// Post-hoc estimation-accuracy events, evaluated against ground truth.
// Purely observational: never feeds back into either algorithm.
struct DiagnosticsReport {
  bool e1 = false;  // row-L1 error of every per-phase transition snapshot <= p_plus/3
  bool e2 = false;  // m0_hat within [2/3 m0, 2 m0]
  bool e3 = false;  // every m_i_hat within [2/3 m_i, 2 m_i]
  bool e4 = false;  // row-L1 error of the returned P_hat <= eta_prime
  bool e5 = false;  // every reward cell within eta_hat_i
  double eta_prime = 0.0;
  std::vector<double> eta_hat;  // per intermediate state
  double lambda_hat = 0.0;
  double p_plus = 0.0;

  bool all_good() const { return e1 && e2 && e3 && e4 && e5; }
};

struct RunResult {
  Policy policy;
  EstimatedModel estimated;
  std::array<std::int64_t, 3> budgets_used{0, 0, 0};
  FrequencyVector f_tilde, f_star;
  DiagnosticsReport diagnostics;
  std::vector<Counts> stage_counts;  // one per estimation phase
};

// Convex-exploration pipeline: estimate transitions, solve the max-min
// reachability program, estimate causal parameters, solve the min-max
// exploration program, estimate rewards, extract the greedy policy.
// Requires T >= 9N so every schedule is nonempty after rounding.
RunResult run_alg_ce(const Instance& inst, std::int64_t T, const SolveOptions& solver_opts,
                     RandomStream& rng);

// Uniform-exploration baseline: round-robin over start interventions with an
// independent round-robin cursor per intermediate state; estimates by direct
// counting plus the same observational conditioning, then extracts the same
// greedy policy.
RunResult run_alg_ue(const Instance& inst, std::int64_t T, RandomStream& rng);

// Value gap between the optimal policy and pi_hat; nonnegative.
double simple_regret(const Instance& inst, const Policy& pi_hat);

// Evaluates the five events and the eta/lambda diagnostics of a finished run.
DiagnosticsReport check_good_event(const Instance& inst, const RunResult& result, std::int64_t T);

// Greedy extraction used by both algorithms: pi(i) = argmax_b R_hat(b, i),
// pi(0) = argmax_a sum_i P_hat(a, i) R_hat(pi(i), i); ties by canonical order.
Policy extract_policy(const Matrix& P_hat, const Matrix& R_hat, int n);

}  // namespace cmdp
