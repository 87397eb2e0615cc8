#include "cmdp/algce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Columns of P_hat with zero empirical mass look unreachable; the solvers
// reject such problems, so solve on the reduced column set and keep the
// frequency vector over the full intervention set.
std::vector<int> observed_columns(const Matrix& P_hat) {
  std::vector<int> cols;
  for (std::size_t c = 0; c < P_hat.cols(); ++c) {
    double mass = 0.0;
    for (std::size_t r = 0; r < P_hat.rows(); ++r) mass += P_hat(r, c);
    if (mass > 0.0) cols.push_back(static_cast<int>(c));
  }
  return cols;
}

Matrix take_columns(const Matrix& P, const std::vector<int>& cols) {
  Matrix out(P.rows(), cols.size());
  for (std::size_t r = 0; r < P.rows(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(r, c) = P(r, static_cast<std::size_t>(cols[c]));
  return out;
}

double row_l1_error(std::span<const double> estimate, std::span<const double> truth) {
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) err += std::abs(estimate[i] - truth[i]);
  return err;
}

}  // namespace

Policy extract_policy(const Matrix& P_hat, const Matrix& R_hat, int n) {
  const auto order = canonical_intervention_order(n);
  const int k = static_cast<int>(P_hat.cols());
  const int N = static_cast<int>(P_hat.rows());
  Policy pi;
  pi.intermediate_actions.resize(static_cast<std::size_t>(k));
  std::vector<double> best_reward(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) {
    double best = -kInf;
    Intervention pick;
    for (int b = 0; b < N; ++b) {
      const double r = R_hat(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(b));
      if (r > best) {
        best = r;
        pick = order[static_cast<std::size_t>(b)];
      }
    }
    pi.intermediate_actions[static_cast<std::size_t>(i - 1)] = pick;
    best_reward[static_cast<std::size_t>(i - 1)] = best;
  }
  double best_value = -kInf;
  for (int a = 0; a < N; ++a) {
    double v = 0.0;
    for (int i = 0; i < k; ++i)
      v += P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i)) *
           best_reward[static_cast<std::size_t>(i)];
    if (v > best_value) {
      best_value = v;
      pi.start_action = order[static_cast<std::size_t>(a)];
    }
  }
  return pi;
}

double simple_regret(const Instance& inst, const Policy& pi_hat) {
  return optimal_policy(inst).second - policy_value(inst, pi_hat);
}

RunResult run_alg_ce(const Instance& inst, std::int64_t T, const SolveOptions& solver_opts,
                     RandomStream& rng) {
  const int N = inst.num_interventions();
  const int k = inst.k();
  if (T < 9 * static_cast<std::int64_t>(N))
    throw std::invalid_argument("run_alg_ce: T must be at least 9N");

  const std::int64_t third = T / 3;
  const std::int64_t budget_rewards = T - 2 * third;  // leftover goes to reward estimation

  TransitionEstimate te = estimate_transition_probabilities(inst, third, rng);

  const std::vector<int> cols = observed_columns(te.P_hat);
  FrequencyVector f_tilde;
  if (cols.size() == te.P_hat.cols()) {
    f_tilde = solve_max_min_reach(te.P_hat, solver_opts.tol);
  } else {
    f_tilde = solve_max_min_reach(take_columns(te.P_hat, cols), solver_opts.tol);
  }

  CausalParamEstimate cp = estimate_causal_parameters(inst, f_tilde, third, rng);

  FrequencyVector f_star;
  {
    std::vector<double> m_d;
    Matrix P_solve = cols.size() == te.P_hat.cols() ? te.P_hat : take_columns(te.P_hat, cols);
    for (std::size_t c = 0; c < P_solve.cols(); ++c) {
      const int state = cols.size() == te.P_hat.cols() ? static_cast<int>(c) + 1 : cols[c] + 1;
      m_d.push_back(static_cast<double>(cp.m_hat[static_cast<std::size_t>(state - 1)]));
    }
    f_star = solve_min_max({std::move(P_solve), std::move(m_d)}, solver_opts).minimizer;
  }

  RewardEstimate re = estimate_rewards(inst, f_star, f_tilde, budget_rewards, cp.I_m, rng);

  RunResult result;
  result.policy = extract_policy(te.P_hat, re.R_hat, inst.n());
  result.budgets_used = {te.counts.episodes, cp.counts.episodes, re.counts.episodes};
  result.f_tilde = f_tilde;
  result.f_star = f_star;

  EstimatedModel& em = result.estimated;
  em.P_hat = te.P_hat;
  em.R_hat = re.R_hat;
  em.q_hat.resize(static_cast<std::size_t>(k) + 1);
  em.m_hat.resize(static_cast<std::size_t>(k) + 1);
  em.I_m_hat.resize(static_cast<std::size_t>(k) + 1);
  em.q_hat[0] = te.q0_hat;
  em.m_hat[0] = te.m0_hat;
  em.I_m_hat[0] = te.I_m0;
  for (int i = 1; i <= k; ++i) {
    em.q_hat[static_cast<std::size_t>(i)] = cp.q_hat[static_cast<std::size_t>(i - 1)];
    em.m_hat[static_cast<std::size_t>(i)] = cp.m_hat[static_cast<std::size_t>(i - 1)];
    em.I_m_hat[static_cast<std::size_t>(i)] = cp.I_m[static_cast<std::size_t>(i - 1)];
  }
  result.stage_counts.push_back(std::move(te.counts));
  result.stage_counts.push_back(std::move(cp.counts));
  result.stage_counts.push_back(std::move(re.counts));
  result.diagnostics = check_good_event(inst, result, T);
  return result;
}

RunResult run_alg_ue(const Instance& inst, std::int64_t T, RandomStream& rng) {
  if (T < 1) throw std::invalid_argument("run_alg_ue: T must be >= 1");
  const int n = inst.n(), k = inst.k(), N = inst.num_interventions();
  const auto& order = inst.intervention_order();

  Counts counts(n, k);
  Episode ep;
  std::vector<std::size_t> cursor(static_cast<std::size_t>(k), 0);
  Intervention played_mid;
  const auto mid_rr = [&](int i) {
    played_mid = order[cursor[static_cast<std::size_t>(i - 1)] % static_cast<std::size_t>(N)];
    cursor[static_cast<std::size_t>(i - 1)] += 1;
    return played_mid;
  };

  for (std::int64_t t = 0; t < T; ++t) {
    const int a = static_cast<int>(t % N);
    sample_episode(inst, order[static_cast<std::size_t>(a)], mid_rr, rng, ep);
    counts.episodes += 1;
    counts.performed[static_cast<std::size_t>(a)] += 1;
    counts.reached[counts.trans(a, ep.reached_state)] += 1;
    if (a == 0) {
      counts.do_rounds0 += 1;
      for (int j = 1; j <= n; ++j) {
        const int v = ep.start_assignment[static_cast<std::size_t>(j - 1)];
        counts.ones0[static_cast<std::size_t>(j - 1)] += v;
        const int idx = intervention_index(Intervention::set(j, v));
        counts.cond_rounds[static_cast<std::size_t>(idx)] += 1;
        counts.cond_reached[counts.trans(idx, ep.reached_state)] += 1;
      }
    }
    const int i = ep.reached_state;
    const int bi = intervention_index(played_mid);
    counts.reward_trials[counts.cell(i, bi)] += 1;
    counts.reward_successes[counts.cell(i, bi)] += ep.reward;
    if (!played_mid.is_set()) {
      counts.mid_do_visits[static_cast<std::size_t>(i - 1)] += 1;
      for (int j = 1; j <= n; ++j) {
        const int v = ep.mid_assignment[static_cast<std::size_t>(j - 1)];
        counts.mid_ones[static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(n) +
                        static_cast<std::size_t>(j - 1)] += v;
        const int ci = intervention_index(Intervention::set(j, v));
        counts.reward_cond_trials[counts.cell(i, ci)] += 1;
        counts.reward_cond_succ[counts.cell(i, ci)] += ep.reward;
      }
    }
  }

  // Pool explicit performances with the conditioned observational rounds.
  Matrix P_hat(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
  for (int a = 0; a < N; ++a) {
    const std::int64_t rounds =
        counts.performed[static_cast<std::size_t>(a)] + counts.cond_rounds[static_cast<std::size_t>(a)];
    if (rounds > 0) {
      for (int i = 1; i <= k; ++i)
        P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
            static_cast<double>(counts.reached[counts.trans(a, i)] +
                                counts.cond_reached[counts.trans(a, i)]) /
            static_cast<double>(rounds);
    } else {
      counts.fallback_row[static_cast<std::size_t>(a)] = 1;
      for (int i = 1; i <= k; ++i)
        P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
            counts.performed[0] > 0
                ? static_cast<double>(counts.reached[counts.trans(0, i)]) /
                      static_cast<double>(counts.performed[0])
                : 1.0 / static_cast<double>(k);
    }
  }

  Matrix R_hat(static_cast<std::size_t>(k), static_cast<std::size_t>(N), 0.5);
  for (int i = 1; i <= k; ++i)
    for (int b = 0; b < N; ++b) {
      const std::size_t cell = counts.cell(i, b);
      const std::int64_t trials = counts.reward_trials[cell] + counts.reward_cond_trials[cell];
      const std::int64_t succ = counts.reward_successes[cell] + counts.reward_cond_succ[cell];
      if (trials > 0)
        R_hat(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(b)) =
            static_cast<double>(succ) / static_cast<double>(trials);
      else
        counts.reward_fallback[cell] = 1;
    }

  RunResult result;
  result.policy = extract_policy(P_hat, R_hat, n);
  result.budgets_used = {T, 0, 0};
  result.f_tilde = FrequencyVector::uniform(static_cast<std::size_t>(N));
  result.f_star = FrequencyVector::uniform(static_cast<std::size_t>(N));

  EstimatedModel& em = result.estimated;
  em.P_hat = std::move(P_hat);
  em.R_hat = std::move(R_hat);
  em.q_hat.resize(static_cast<std::size_t>(k) + 1);
  em.m_hat.resize(static_cast<std::size_t>(k) + 1);
  em.I_m_hat.resize(static_cast<std::size_t>(k) + 1);
  {
    std::vector<double> q0(static_cast<std::size_t>(n), 0.0);
    if (counts.do_rounds0 > 0)
      for (int j = 0; j < n; ++j)
        q0[static_cast<std::size_t>(j)] = static_cast<double>(counts.ones0[static_cast<std::size_t>(j)]) /
                                          static_cast<double>(counts.do_rounds0);
    MResult m0 = true_m(q0);
    em.q_hat[0] = std::move(q0);
    em.m_hat[0] = m0.m;
    em.I_m_hat[0] = std::move(m0.interventions);
  }
  for (int i = 1; i <= k; ++i) {
    std::vector<double> q(static_cast<std::size_t>(n), 0.0);
    const std::int64_t visits = counts.mid_do_visits[static_cast<std::size_t>(i - 1)];
    if (visits > 0)
      for (int j = 0; j < n; ++j)
        q[static_cast<std::size_t>(j)] =
            static_cast<double>(counts.mid_ones[static_cast<std::size_t>(i - 1) *
                                                    static_cast<std::size_t>(n) +
                                                static_cast<std::size_t>(j)]) /
            static_cast<double>(visits);
    else
      counts.state_unvisited[static_cast<std::size_t>(i - 1)] = 1;
    MResult m = true_m(q);
    em.q_hat[static_cast<std::size_t>(i)] = std::move(q);
    em.m_hat[static_cast<std::size_t>(i)] = m.m;
    em.I_m_hat[static_cast<std::size_t>(i)] = std::move(m.interventions);
  }
  result.stage_counts.push_back(std::move(counts));
  result.diagnostics = check_good_event(inst, result, T);
  return result;
}

DiagnosticsReport check_good_event(const Instance& inst, const RunResult& result, std::int64_t T) {
  const int k = inst.k(), N = inst.num_interventions();
  DiagnosticsReport d;
  d.p_plus = inst.p_plus();

  // True causal parameters.
  const int m0_true = true_m(inst.start().q).m;
  std::vector<int> m_true(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) m_true[static_cast<std::size_t>(i - 1)] = true_m(inst.mid(i).q).m;

  const Matrix& P = inst.transitions();
  const Matrix& P_hat = result.estimated.P_hat;

  // E1 over every per-phase snapshot: the returned P_hat stands in for the
  // first phase, later phases contribute their explicit-count estimates.
  d.e1 = true;
  for (std::size_t stage = 0; stage < result.stage_counts.size(); ++stage) {
    const Matrix snapshot = stage == 0
                                ? P_hat
                                : result.stage_counts[stage].explicit_transition_estimate(P_hat);
    for (int a = 0; a < N; ++a)
      if (row_l1_error(snapshot.row(static_cast<std::size_t>(a)),
                       P.row(static_cast<std::size_t>(a))) > d.p_plus / 3.0)
        d.e1 = false;
  }

  const int m0_hat = result.estimated.m_hat[0];
  d.e2 = 3 * m0_hat >= 2 * m0_true && m0_hat <= 2 * m0_true;

  d.e3 = true;
  for (int i = 1; i <= k; ++i) {
    const int mh = result.estimated.m_hat[static_cast<std::size_t>(i)];
    const int mt = m_true[static_cast<std::size_t>(i - 1)];
    if (!(3 * mh >= 2 * mt && mh <= 2 * mt)) d.e3 = false;
  }

  d.eta_prime = std::sqrt(150.0 * static_cast<double>(m0_true) /
                          (static_cast<double>(T) * d.p_plus) *
                          std::log(3.0 * static_cast<double>(T) / static_cast<double>(k)));
  d.e4 = true;
  for (int a = 0; a < N; ++a)
    if (row_l1_error(P_hat.row(static_cast<std::size_t>(a)), P.row(static_cast<std::size_t>(a))) >
        d.eta_prime)
      d.e4 = false;

  // Reach probabilities under the computed exploration frequencies.
  std::vector<double> w(static_cast<std::size_t>(k), 0.0);
  for (int a = 0; a < N; ++a)
    for (int i = 0; i < k; ++i)
      w[static_cast<std::size_t>(i)] += result.f_star[static_cast<std::size_t>(a)] *
                                        P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i));

  d.eta_hat.resize(static_cast<std::size_t>(k));
  d.e5 = true;
  for (int i = 1; i <= k; ++i) {
    const double wi = w[static_cast<std::size_t>(i - 1)];
    const double mh = static_cast<double>(result.estimated.m_hat[static_cast<std::size_t>(i)]);
    const double eta =
        wi > 0.0 ? std::sqrt(27.0 * mh / (static_cast<double>(T) * wi) *
                             std::log(2.0 * static_cast<double>(T) * static_cast<double>(N)))
                 : kInf;
    d.eta_hat[static_cast<std::size_t>(i - 1)] = eta;
    for (int b = 0; b < N; ++b) {
      const double truth = expected_reward(
          inst, i, inst.intervention_order()[static_cast<std::size_t>(b)]);
      const double est = result.estimated.R_hat(static_cast<std::size_t>(i - 1),
                                                static_cast<std::size_t>(b));
      if (std::abs(truth - est) > eta) d.e5 = false;
    }
  }

  // lambda_hat from the run's own estimates.
  double lam = 0.0;
  std::vector<double> sqrt_m(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    sqrt_m[static_cast<std::size_t>(i)] =
        std::sqrt(static_cast<double>(result.estimated.m_hat[static_cast<std::size_t>(i + 1)]));
  for (int a = 0; a < N; ++a) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      const double pai = P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i));
      if (pai == 0.0) continue;
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi <= 0.0) {
        s = kInf;
        break;
      }
      s += pai * sqrt_m[static_cast<std::size_t>(i)] / std::sqrt(wi);
    }
    lam = std::max(lam, s * s);
  }
  d.lambda_hat = lam;
  return d;
}

}  // namespace cmdp
