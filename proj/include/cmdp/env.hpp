#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmdp/core.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class InterventionKind : std::uint8_t { DoNothing, Set };

// Atomic intervention: do-nothing, or fix one variable to 0/1.
struct Intervention {
  InterventionKind kind = InterventionKind::DoNothing;
  int var = 0;    // 1-based variable index; meaningful iff kind == Set
  int value = 0;  // 0 or 1

  static Intervention nothing() { return {}; }
  static Intervention set(int var, int value) {
    return {InterventionKind::Set, var, value};
  }
  bool is_set() const { return kind == InterventionKind::Set; }
  bool operator==(const Intervention&) const = default;
};

std::string to_string(const Intervention& a);

// Deterministic ordering: do() first, then do(X_1=0), do(X_1=1), do(X_2=0), ...
// Fixes transition-matrix row order, tie-breaking and CSV output.
std::vector<Intervention> canonical_intervention_order(int n);

inline int num_interventions(int n) { return 2 * n + 1; }

// Position of `a` in the canonical ordering for n variables.
inline int intervention_index(const Intervention& a) {
  if (!a.is_set()) return 0;
  return 1 + 2 * (a.var - 1) + a.value;
}

// Bernoulli reward depending on at most a few variables: the probability of
// the first override whose (var, value) matches the realized assignment,
// in list order; `base` if none match.
struct RewardOverride {
  int var = 0;
  int value = 0;
  double prob = 0.5;
};

struct RewardModel {
  double base = 0.5;
  std::vector<RewardOverride> overrides;

  double success_prob(std::span<const std::uint8_t> assignment) const {
    for (const auto& o : overrides)
      if (assignment[static_cast<std::size_t>(o.var - 1)] == o.value) return o.prob;
    return base;
  }
};

// One causal graph: n independent Bernoulli variables plus the reward law.
struct StateModel {
  std::vector<double> q;  // q[j-1] = P{X_j = 1}
  RewardModel reward;
};

struct Policy {
  Intervention start_action;
  std::vector<Intervention> intermediate_actions;  // index i-1 for state i
  bool operator==(const Policy&) const = default;
};

struct Episode {
  std::vector<std::uint8_t> start_assignment;
  int reached_state = 1;  // 1..k
  std::vector<std::uint8_t> mid_assignment;
  int reward = 0;
};

// Ground-truth two-stage causal MDP.  Immutable after construction and safe
// to share across threads.
class Instance {
 public:
  // transitions: N x k row-stochastic matrix, rows in canonical order.
  // Validates row sums (1e-12), entry ranges, and the per-variable
  // consistency identity (1-q0_j) P(X_j=0) + q0_j P(X_j=1) = P(do()) (1e-9).
  Instance(int n, int k, StateModel start, std::vector<StateModel> intermediates,
           Matrix transitions);

  int n() const { return n_; }
  int k() const { return k_; }
  int num_interventions() const { return 2 * n_ + 1; }

  const StateModel& start() const { return start_; }
  const StateModel& mid(int i) const { return intermediates_[static_cast<std::size_t>(i - 1)]; }
  const Matrix& transitions() const { return transitions_; }
  std::span<const double> row(const Intervention& a) const {
    return transitions_.row(static_cast<std::size_t>(intervention_index(a)));
  }
  const std::vector<Intervention>& intervention_order() const { return order_; }

  // Minimum nonzero transition probability (p_plus).
  double p_plus() const { return p_plus_; }

  // P{X^0_j = 1 | reached state i} under do(); used to couple the start
  // assignment with the reached state so that observational conditioning
  // reproduces the intervention rows exactly.
  double start_bit_prob_given_state(int j, int i) const {
    return theta_(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
  }

 private:
  int n_ = 0;
  int k_ = 0;
  StateModel start_;
  std::vector<StateModel> intermediates_;
  Matrix transitions_;
  std::vector<Intervention> order_;
  Matrix theta_;  // k x n
  double p_plus_ = 0.0;

  void validate() const;
  void build_coupling();
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// One traversal: start intervention, transition, intermediate intervention,
// reward.  Under do() at state 0 the assignment is drawn jointly with the
// reached state (state from the do() row, bits conditionally independent
// given the state) so that P{i | X_j = v} equals the do(X_j=v) row for every
// variable.  Under an explicit start intervention the state is drawn from
// that intervention's row and the unforced bits from their marginals.
template <class MidPolicy>
void sample_episode(const Instance& inst, const Intervention& start_action,
                    MidPolicy&& mid_policy, RandomStream& rng, Episode& out) {
  const int n = inst.n();
  out.start_assignment.resize(static_cast<std::size_t>(n));
  out.mid_assignment.resize(static_cast<std::size_t>(n));

  int state;
  if (!start_action.is_set()) {
    state = static_cast<int>(rng.categorical(inst.row(Intervention::nothing()))) + 1;
    for (int j = 1; j <= n; ++j)
      out.start_assignment[static_cast<std::size_t>(j - 1)] =
          rng.bernoulli(inst.start_bit_prob_given_state(j, state)) ? 1 : 0;
  } else {
    for (int j = 1; j <= n; ++j) {
      const bool forced = (j == start_action.var);
      out.start_assignment[static_cast<std::size_t>(j - 1)] =
          forced ? static_cast<std::uint8_t>(start_action.value)
                 : (rng.bernoulli(inst.start().q[static_cast<std::size_t>(j - 1)]) ? 1 : 0);
    }
    state = static_cast<int>(rng.categorical(inst.row(start_action))) + 1;
  }
  out.reached_state = state;

  const Intervention mid = mid_policy(state);
  const StateModel& sm = inst.mid(state);
  for (int j = 1; j <= n; ++j) {
    const bool forced = mid.is_set() && j == mid.var;
    out.mid_assignment[static_cast<std::size_t>(j - 1)] =
        forced ? static_cast<std::uint8_t>(mid.value)
               : (rng.bernoulli(sm.q[static_cast<std::size_t>(j - 1)]) ? 1 : 0);
  }
  out.reward = rng.bernoulli(sm.reward.success_prob(out.mid_assignment)) ? 1 : 0;
}

template <class MidPolicy>
Episode sample_episode(const Instance& inst, const Intervention& start_action,
                       MidPolicy&& mid_policy, RandomStream& rng) {
  Episode ep;
  sample_episode(inst, start_action, mid_policy, rng, ep);
  return ep;
}

// Exact E[R_i | a]: marginalizes the reward model over the product Bernoulli
// law with the intervened bit fixed.  No sampling.
double expected_reward(const Instance& inst, int state, const Intervention& a);

// Exact policy value: sum_i E[R_i | pi(i)] * P{i | pi(0)}.
double policy_value(const Instance& inst, const Policy& pi);

// Exact optimum by enumeration; ties broken by canonical order.
std::pair<Policy, double> optimal_policy(const Instance& inst);

// Causal parameter m = max{ j : q_(j) < 1/j } over sorted folded
// probabilities, plus the matching minority-value interventions (sorted
// order).  m >= 1 always since q_(1) <= 1/2 < 1.
struct MResult {
  int m = 0;
  std::vector<Intervention> interventions;
};
MResult true_m(std::span<const double> q);

// Forward declarations wired to the opt module.
struct SolveOptions;
struct FrequencyVector;

// lambda = min_f || P M^{1/2} (P^T f)^{o-1/2} ||_inf^2 and its minimizer.
// Throws UnreachableStateError if some column of P is identically zero.
std::pair<double, FrequencyVector> lambda_of(const Matrix& P, const std::vector<double>& m,
                                             const SolveOptions& opts);
std::pair<double, FrequencyVector> lambda_of(const Matrix& P, const std::vector<double>& m);

// Experimental family: q^i_j = 0 for j <= m (else 0.5) at intermediate
// states, q^0_j = 0 for j <= m0 (else 0.5); reward 0.5 everywhere except
// 0.5+eps when X^1_1 = 1 at state 1; do() row uniform, do(X_i=1) rows put
// 2/k on state i, and do(X_i=0) rows follow from the consistency identity.
// Requires k == n, 1 <= m <= n, 0 <= m0 <= n, eps in (0, 0.5].
Instance make_experiment_instance(int n, int k, int m, int m0, double eps);

// Deterministic lower-bound family: n = k-1 variables, q^0 = 0,
// P{i | do(X_i=1)} = 1 for i in [n], every other row sends mass to state k.
// Without target all rewards are 0.5; with target (state, intervention) the
// target cell pays 0.5+beta.
Instance make_lower_bound_instance(int k, std::optional<std::pair<int, Intervention>> target,
                                   double beta);

// beta = min{1/3, sqrt(sum_m / (18 T))}.
double lower_bound_beta(double sum_m, double T);

// Flat text serialization; format documented in the README.
std::string write_instance_text(const Instance& inst);
Instance read_instance_text(const std::string& text);

}  // namespace cmdp
