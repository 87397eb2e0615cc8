#include "cmdp/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cmdp {

Counts::Counts(int n, int k) : n_(n), k_(k), N_(2 * n + 1) {
  ones0.assign(static_cast<std::size_t>(n), 0);
  performed.assign(static_cast<std::size_t>(N_), 0);
  reached.assign(static_cast<std::size_t>(N_) * static_cast<std::size_t>(k), 0);
  cond_rounds.assign(static_cast<std::size_t>(N_), 0);
  cond_reached.assign(static_cast<std::size_t>(N_) * static_cast<std::size_t>(k), 0);
  mid_do_visits.assign(static_cast<std::size_t>(k), 0);
  mid_ones.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(n), 0);
  reward_trials.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(N_), 0);
  reward_successes.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(N_), 0);
  reward_cond_trials.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(N_), 0);
  reward_cond_succ.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(N_), 0);
  fallback_row.assign(static_cast<std::size_t>(N_), 0);
  state_unvisited.assign(static_cast<std::size_t>(k), 0);
  reward_fallback.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(N_), 0);
}

Matrix Counts::explicit_transition_estimate(const Matrix& fallback) const {
  Matrix out(static_cast<std::size_t>(N_), static_cast<std::size_t>(k_));
  for (int a = 0; a < N_; ++a) {
    const std::int64_t rounds = performed[static_cast<std::size_t>(a)];
    for (int i = 1; i <= k_; ++i)
      out(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
          rounds > 0 ? static_cast<double>(reached[trans(a, i)]) / static_cast<double>(rounds)
                     : fallback(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1));
  }
  return out;
}

std::vector<std::int64_t> apportion(std::span<const double> weights, std::int64_t total) {
  const std::size_t n = weights.size();
  std::vector<std::int64_t> parts(n, 0);
  if (n == 0 || total <= 0) return parts;
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("apportion: negative weight");
    sum += w;
  }
  if (sum <= 0.0) throw std::invalid_argument("apportion: zero weight vector");

  std::vector<std::pair<double, std::size_t>> remainders(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double quota = static_cast<double>(total) * weights[i] / sum;
    parts[i] = static_cast<std::int64_t>(std::floor(quota));
    assigned += parts[i];
    remainders[i] = {quota - std::floor(quota), i};
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::int64_t r = 0; r < total - assigned; ++r)
    parts[remainders[static_cast<std::size_t>(r) % n].second] += 1;
  return parts;
}

namespace {

void record_start_observation(Counts& c, const Instance& inst, const Episode& ep) {
  // Caller guarantees the start intervention was do().
  c.do_rounds0 += 1;
  for (int j = 1; j <= inst.n(); ++j)
    c.ones0[static_cast<std::size_t>(j - 1)] += ep.start_assignment[static_cast<std::size_t>(j - 1)];
  for (int j = 1; j <= inst.n(); ++j) {
    const int v = ep.start_assignment[static_cast<std::size_t>(j - 1)];
    const int idx = intervention_index(Intervention::set(j, v));
    c.cond_rounds[static_cast<std::size_t>(idx)] += 1;
    c.cond_reached[c.trans(idx, ep.reached_state)] += 1;
  }
}

void record_mid_observation(Counts& c, const Instance& inst, const Episode& ep) {
  // Caller guarantees the intermediate intervention was do().
  const int i = ep.reached_state;
  c.mid_do_visits[static_cast<std::size_t>(i - 1)] += 1;
  for (int j = 1; j <= inst.n(); ++j)
    c.mid_ones[static_cast<std::size_t>(i - 1) * static_cast<std::size_t>(inst.n()) +
               static_cast<std::size_t>(j - 1)] += ep.mid_assignment[static_cast<std::size_t>(j - 1)];
}

}  // namespace

TransitionEstimate estimate_transition_probabilities(const Instance& inst, std::int64_t T_budget,
                                                     RandomStream& rng) {
  if (T_budget < 2) throw BudgetTooSmallError("estimate_transition_probabilities: budget < 2");
  const int n = inst.n(), k = inst.k(), N = inst.num_interventions();
  Counts counts(n, k);
  Episode ep;
  const auto mid_do = [](int) { return Intervention::nothing(); };

  const std::int64_t observe_rounds = T_budget / 2;
  for (std::int64_t t = 0; t < observe_rounds; ++t) {
    sample_episode(inst, Intervention::nothing(), mid_do, rng, ep);
    counts.episodes += 1;
    record_start_observation(counts, inst, ep);
    counts.performed[0] += 1;
    counts.reached[counts.trans(0, ep.reached_state)] += 1;
  }

  std::vector<double> q0_hat(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    q0_hat[static_cast<std::size_t>(j)] =
        static_cast<double>(counts.ones0[static_cast<std::size_t>(j)]) /
        static_cast<double>(observe_rounds);
  MResult m0 = true_m(q0_hat);

  if (T_budget < 2 * static_cast<std::int64_t>(m0.interventions.size()))
    throw BudgetTooSmallError("estimate_transition_probabilities: budget < 2 |I_m0|");

  // Remaining budget split evenly across the minority interventions.
  const std::int64_t explicit_rounds = T_budget - observe_rounds;
  if (!m0.interventions.empty()) {
    const std::vector<double> even(m0.interventions.size(), 1.0);
    const auto quotas = apportion(even, explicit_rounds);
    for (std::size_t idx = 0; idx < m0.interventions.size(); ++idx) {
      const Intervention a = m0.interventions[idx];
      const int ai = intervention_index(a);
      for (std::int64_t t = 0; t < quotas[idx]; ++t) {
        sample_episode(inst, a, mid_do, rng, ep);
        counts.episodes += 1;
        counts.performed[static_cast<std::size_t>(ai)] += 1;
        counts.reached[counts.trans(ai, ep.reached_state)] += 1;
      }
    }
  }

  // Assemble P_hat: do() and minority rows from explicit counts, everything
  // else by conditioning inside the do() rounds.
  Matrix P_hat(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
  std::vector<bool> is_minority(static_cast<std::size_t>(N), false);
  for (const auto& a : m0.interventions) is_minority[static_cast<std::size_t>(intervention_index(a))] = true;

  for (int i = 1; i <= k; ++i)
    P_hat(0, static_cast<std::size_t>(i - 1)) =
        static_cast<double>(counts.reached[counts.trans(0, i)]) / static_cast<double>(observe_rounds);
  for (int a = 1; a < N; ++a) {
    if (is_minority[static_cast<std::size_t>(a)]) {
      const std::int64_t rounds = counts.performed[static_cast<std::size_t>(a)];
      for (int i = 1; i <= k; ++i)
        P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
            static_cast<double>(counts.reached[counts.trans(a, i)]) / static_cast<double>(rounds);
    } else {
      const std::int64_t rounds = counts.cond_rounds[static_cast<std::size_t>(a)];
      if (rounds > 0) {
        for (int i = 1; i <= k; ++i)
          P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
              static_cast<double>(counts.cond_reached[counts.trans(a, i)]) /
              static_cast<double>(rounds);
      } else {
        counts.fallback_row[static_cast<std::size_t>(a)] = 1;
        for (int i = 1; i <= k; ++i)
          P_hat(static_cast<std::size_t>(a), static_cast<std::size_t>(i - 1)) =
              P_hat(0, static_cast<std::size_t>(i - 1));
      }
    }
  }

  TransitionEstimate out;
  out.P_hat = std::move(P_hat);
  out.m0_hat = m0.m;
  out.I_m0 = std::move(m0.interventions);
  out.q0_hat = std::move(q0_hat);
  out.counts = std::move(counts);
  return out;
}

CausalParamEstimate estimate_causal_parameters(const Instance& inst, const FrequencyVector& f_tilde,
                                               std::int64_t T_budget, RandomStream& rng) {
  const int n = inst.n(), k = inst.k(), N = inst.num_interventions();
  if (f_tilde.size() != static_cast<std::size_t>(N) || !f_tilde.on_simplex())
    throw std::invalid_argument("estimate_causal_parameters: f_tilde not on the simplex");
  if (T_budget < 0) throw std::invalid_argument("estimate_causal_parameters: negative budget");

  std::vector<double> f(static_cast<std::size_t>(N));
  for (int a = 0; a < N; ++a)
    f[static_cast<std::size_t>(a)] =
        0.5 * (f_tilde[static_cast<std::size_t>(a)] + 1.0 / static_cast<double>(N));

  Counts counts(n, k);
  Episode ep;
  const auto& order = inst.intervention_order();
  const auto quotas = apportion(f, T_budget);
  const auto mid_do = [](int) { return Intervention::nothing(); };
  for (int a = 0; a < N; ++a) {
    for (std::int64_t t = 0; t < quotas[static_cast<std::size_t>(a)]; ++t) {
      sample_episode(inst, order[static_cast<std::size_t>(a)], mid_do, rng, ep);
      counts.episodes += 1;
      counts.performed[static_cast<std::size_t>(a)] += 1;
      counts.reached[counts.trans(a, ep.reached_state)] += 1;
      if (a == 0) record_start_observation(counts, inst, ep);
      record_mid_observation(counts, inst, ep);
    }
  }

  CausalParamEstimate out;
  out.m_hat.resize(static_cast<std::size_t>(k));
  out.q_hat.resize(static_cast<std::size_t>(k));
  out.I_m.resize(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) {
    const std::int64_t visits = counts.mid_do_visits[static_cast<std::size_t>(i - 1)];
    std::vector<double>& q = out.q_hat[static_cast<std::size_t>(i - 1)];
    q.assign(static_cast<std::size_t>(n), 0.0);
    if (visits > 0) {
      for (int j = 0; j < n; ++j)
        q[static_cast<std::size_t>(j)] =
            static_cast<double>(counts.mid_ones[static_cast<std::size_t>(i - 1) *
                                                    static_cast<std::size_t>(n) +
                                                static_cast<std::size_t>(j)]) /
            static_cast<double>(visits);
    } else {
      counts.state_unvisited[static_cast<std::size_t>(i - 1)] = 1;
      // Conservative default: all-zero q gives m_hat = n with every minority
      // intervention included.
    }
    MResult m = true_m(q);
    out.m_hat[static_cast<std::size_t>(i - 1)] = m.m;
    out.I_m[static_cast<std::size_t>(i - 1)] = std::move(m.interventions);
  }
  out.counts = std::move(counts);
  return out;
}

RewardEstimate estimate_rewards(const Instance& inst, const FrequencyVector& f_star,
                                const FrequencyVector& f_tilde, std::int64_t T_budget,
                                const std::vector<std::vector<Intervention>>& I_m_hat,
                                RandomStream& rng) {
  const int n = inst.n(), k = inst.k(), N = inst.num_interventions();
  if (f_star.size() != static_cast<std::size_t>(N) || !f_star.on_simplex())
    throw std::invalid_argument("estimate_rewards: f_star not on the simplex");
  if (f_tilde.size() != static_cast<std::size_t>(N) || !f_tilde.on_simplex())
    throw std::invalid_argument("estimate_rewards: f_tilde not on the simplex");
  if (I_m_hat.size() != static_cast<std::size_t>(k))
    throw std::invalid_argument("estimate_rewards: need I_m for every intermediate state");
  if (T_budget < 0) throw std::invalid_argument("estimate_rewards: negative budget");

  std::vector<double> f(static_cast<std::size_t>(N));
  for (int a = 0; a < N; ++a)
    f[static_cast<std::size_t>(a)] =
        (f_star[static_cast<std::size_t>(a)] + f_tilde[static_cast<std::size_t>(a)] +
         1.0 / static_cast<double>(N)) /
        3.0;

  Counts counts(n, k);
  Episode ep;
  const auto& order = inst.intervention_order();

  // Phase 1: observational rounds; rewards for I_{m_i}^c by conditioning.
  const std::int64_t phase1 = T_budget / 2;
  {
    const auto quotas = apportion(f, phase1);
    const auto mid_do = [](int) { return Intervention::nothing(); };
    for (int a = 0; a < N; ++a) {
      for (std::int64_t t = 0; t < quotas[static_cast<std::size_t>(a)]; ++t) {
        sample_episode(inst, order[static_cast<std::size_t>(a)], mid_do, rng, ep);
        counts.episodes += 1;
        counts.performed[static_cast<std::size_t>(a)] += 1;
        counts.reached[counts.trans(a, ep.reached_state)] += 1;
        record_mid_observation(counts, inst, ep);
        const int i = ep.reached_state;
        counts.reward_trials[counts.cell(i, 0)] += 1;
        counts.reward_successes[counts.cell(i, 0)] += ep.reward;
        for (int j = 1; j <= n; ++j) {
          const int v = ep.mid_assignment[static_cast<std::size_t>(j - 1)];
          const int bi = intervention_index(Intervention::set(j, v));
          counts.reward_cond_trials[counts.cell(i, bi)] += 1;
          counts.reward_cond_succ[counts.cell(i, bi)] += ep.reward;
        }
      }
    }
  }

  // Phase 2: same schedule, round-robin over I_{m_i} across visitations.
  {
    const auto quotas = apportion(f, T_budget - phase1);
    std::vector<std::size_t> cursor(static_cast<std::size_t>(k), 0);
    const auto mid_rr = [&](int i) {
      const auto& set = I_m_hat[static_cast<std::size_t>(i - 1)];
      if (set.empty()) return Intervention::nothing();
      const Intervention b = set[cursor[static_cast<std::size_t>(i - 1)] % set.size()];
      cursor[static_cast<std::size_t>(i - 1)] += 1;
      return b;
    };
    for (int a = 0; a < N; ++a) {
      for (std::int64_t t = 0; t < quotas[static_cast<std::size_t>(a)]; ++t) {
        sample_episode(inst, order[static_cast<std::size_t>(a)], mid_rr, rng, ep);
        counts.episodes += 1;
        counts.performed[static_cast<std::size_t>(a)] += 1;
        counts.reached[counts.trans(a, ep.reached_state)] += 1;
        const int i = ep.reached_state;
        const auto& set = I_m_hat[static_cast<std::size_t>(i - 1)];
        if (!set.empty()) {
          const std::size_t used = (cursor[static_cast<std::size_t>(i - 1)] - 1) % set.size();
          const int bi = intervention_index(set[used]);
          counts.reward_trials[counts.cell(i, bi)] += 1;
          counts.reward_successes[counts.cell(i, bi)] += ep.reward;
        }
      }
    }
  }

  // Assemble R_hat: minority cells from phase-2 plays, the rest from
  // conditioned phase-1 observations; unobserved cells get 0.5.
  Matrix R_hat(static_cast<std::size_t>(k), static_cast<std::size_t>(N), 0.5);
  for (int i = 1; i <= k; ++i) {
    std::vector<bool> minority(static_cast<std::size_t>(N), false);
    for (const auto& b : I_m_hat[static_cast<std::size_t>(i - 1)])
      minority[static_cast<std::size_t>(intervention_index(b))] = true;
    for (int bi = 0; bi < N; ++bi) {
      const std::size_t cell = counts.cell(i, bi);
      std::int64_t trials, succ;
      if (minority[static_cast<std::size_t>(bi)]) {
        trials = counts.reward_trials[cell];
        succ = counts.reward_successes[cell];
      } else if (bi == 0) {
        trials = counts.reward_trials[cell];
        succ = counts.reward_successes[cell];
      } else {
        trials = counts.reward_cond_trials[cell];
        succ = counts.reward_cond_succ[cell];
      }
      if (trials > 0)
        R_hat(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(bi)) =
            static_cast<double>(succ) / static_cast<double>(trials);
      else
        counts.reward_fallback[cell] = 1;
    }
  }

  RewardEstimate out;
  out.R_hat = std::move(R_hat);
  out.counts = std::move(counts);
  return out;
}

}  // namespace cmdp
