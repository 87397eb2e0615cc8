#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmdp/core.hpp"
#include "cmdp/env.hpp"
#include "cmdp/opt.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// Empirical tallies shared by the sampling subroutines.  Every estimate in
// the pipeline is a ratio of cells recorded here.
struct Counts {
  // do() rounds at state 0.
  std::int64_t do_rounds0 = 0;
  std::vector<std::int64_t> ones0;  // n: realized X^0_j = 1 within do() rounds

  // Explicit start interventions: performances and reached-state tallies.
  std::vector<std::int64_t> performed;        // N
  std::vector<std::int64_t> reached;          // N*k
  // Observational rows: do() rounds where a's variable realized a's value.
  std::vector<std::int64_t> cond_rounds;      // N
  std::vector<std::int64_t> cond_reached;     // N*k

  // do() rounds at intermediate states.
  std::vector<std::int64_t> mid_do_visits;  // k
  std::vector<std::int64_t> mid_ones;       // k*n

  // Reward tallies: explicit plays and observational (conditioned) rounds.
  std::vector<std::int64_t> reward_trials;       // k*N
  std::vector<std::int64_t> reward_successes;    // k*N
  std::vector<std::int64_t> reward_cond_trials;  // k*N
  std::vector<std::int64_t> reward_cond_succ;    // k*N

  std::int64_t episodes = 0;

  std::vector<std::uint8_t> fallback_row;      // N: row estimated by fallback
  std::vector<std::uint8_t> state_unvisited;   // k
  std::vector<std::uint8_t> reward_fallback;   // k*N

  Counts() = default;
  Counts(int n, int k);

  std::size_t cell(int state, int intervention_idx) const {
    return static_cast<std::size_t>(state - 1) * N_ + static_cast<std::size_t>(intervention_idx);
  }
  std::size_t trans(int intervention_idx, int state) const {
    return static_cast<std::size_t>(intervention_idx) * k_ + static_cast<std::size_t>(state - 1);
  }

  // Transition estimate from this phase's explicit performances; rows never
  // performed fall back to the supplied matrix.
  Matrix explicit_transition_estimate(const Matrix& fallback) const;

  int n_ = 0, k_ = 0, N_ = 0;
};

// Alg.: estimate transition probabilities.  First half of the budget plays
// do() at state 0 (recording assignments and reached states); minority rows
// I_{m0} get the second half split evenly and played explicitly; every other
// row is estimated by conditioning on the realized variable value within the
// do() rounds.
struct TransitionEstimate {
  Matrix P_hat;  // N x k
  int m0_hat = 0;
  std::vector<Intervention> I_m0;
  std::vector<double> q0_hat;
  Counts counts;
};
TransitionEstimate estimate_transition_probabilities(const Instance& inst, std::int64_t T_budget,
                                                     RandomStream& rng);

// Alg.: estimate causal parameters.  Plays each start intervention for a
// share of the budget given by f = (f_tilde + uniform)/2, performs do() at
// the reached state and tallies assignments; unvisited states get the
// conservative default m_hat = n.
struct CausalParamEstimate {
  std::vector<int> m_hat;                          // k
  std::vector<std::vector<double>> q_hat;          // k vectors of length n
  std::vector<std::vector<Intervention>> I_m;      // k
  Counts counts;
};
CausalParamEstimate estimate_causal_parameters(const Instance& inst, const FrequencyVector& f_tilde,
                                               std::int64_t T_budget, RandomStream& rng);

// Alg.: estimate rewards.  Phase 1 plays the mixed schedule
// f = (f_star + f_tilde + uniform)/3 with do() at the reached state and
// estimates rewards for interventions outside I_{m_i} by conditioning;
// phase 2 repeats the schedule playing I_{m_i} round-robin across
// visitations.  Cells never observed get 0.5 and a flag.
struct RewardEstimate {
  Matrix R_hat;  // k x N
  Counts counts;
};
RewardEstimate estimate_rewards(const Instance& inst, const FrequencyVector& f_star,
                                const FrequencyVector& f_tilde, std::int64_t T_budget,
                                const std::vector<std::vector<Intervention>>& I_m_hat,
                                RandomStream& rng);

// Everything the pipeline learns about an instance.
struct EstimatedModel {
  std::vector<std::vector<double>> q_hat;      // k+1 entries; [0] is state 0
  std::vector<int> m_hat;                      // k+1
  Matrix P_hat;                                // N x k
  Matrix R_hat;                                // k x N
  std::vector<std::vector<Intervention>> I_m_hat;  // k+1
};

// Largest-remainder apportionment of `total` units proportionally to
// `weights`; the parts always sum to exactly `total`.
std::vector<std::int64_t> apportion(std::span<const double> weights, std::int64_t total);

}  // namespace cmdp
