#include "cmdp/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace cmdp {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kConsistencyTol = 1e-9;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(const Intervention& a) {
  if (!a.is_set()) return "do()";
  std::ostringstream os;
  os << "do(X_" << a.var << "=" << a.value << ")";
  return os.str();
}

std::vector<Intervention> canonical_intervention_order(int n) {
  if (n < 1) throw std::invalid_argument("canonical_intervention_order: n must be >= 1");
  std::vector<Intervention> order;
  order.reserve(static_cast<std::size_t>(2 * n + 1));
  order.push_back(Intervention::nothing());
  for (int j = 1; j <= n; ++j) {
    order.push_back(Intervention::set(j, 0));
    order.push_back(Intervention::set(j, 1));
  }
  return order;
}

Instance::Instance(int n, int k, StateModel start, std::vector<StateModel> intermediates,
                   Matrix transitions)
    : n_(n),
      k_(k),
      start_(std::move(start)),
      intermediates_(std::move(intermediates)),
      transitions_(std::move(transitions)),
      order_(canonical_intervention_order(n)) {
  validate();
  build_coupling();
}

void Instance::validate() const {
  if (n_ < 1 || k_ < 1) throw std::invalid_argument("Instance: n and k must be >= 1");
  const std::size_t N = static_cast<std::size_t>(2 * n_ + 1);
  if (transitions_.rows() != N || transitions_.cols() != static_cast<std::size_t>(k_))
    throw std::invalid_argument("Instance: transition matrix must be N x k");
  if (start_.q.size() != static_cast<std::size_t>(n_))
    throw std::invalid_argument("Instance: start q has wrong length");
  if (intermediates_.size() != static_cast<std::size_t>(k_))
    throw std::invalid_argument("Instance: need one StateModel per intermediate state");

  auto check_state = [&](const StateModel& s, const char* where) {
    if (s.q.size() != static_cast<std::size_t>(n_))
      throw std::invalid_argument(std::string("Instance: q length mismatch at ") + where);
    for (double qj : s.q)
      if (!(qj >= 0.0 && qj <= 1.0))
        throw std::invalid_argument(std::string("Instance: q out of [0,1] at ") + where);
    if (!(s.reward.base >= 0.0 && s.reward.base <= 1.0))
      throw std::invalid_argument("Instance: reward base out of [0,1]");
    for (const auto& o : s.reward.overrides) {
      if (o.var < 1 || o.var > n_) throw std::invalid_argument("Instance: override var out of range");
      if (o.value != 0 && o.value != 1) throw std::invalid_argument("Instance: override value not a bit");
      if (!(o.prob >= 0.0 && o.prob <= 1.0))
        throw std::invalid_argument("Instance: override prob out of [0,1]");
      for (const auto& other : s.reward.overrides)
        if (&other != &o && other.var == o.var && other.value == o.value)
          throw std::invalid_argument("Instance: duplicate (var, value) override");
    }
  };
  check_state(start_, "state 0");
  for (int i = 1; i <= k_; ++i) check_state(mid(i), "intermediate state");

  for (std::size_t r = 0; r < N; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k_); ++c) {
      const double p = transitions_(r, c);
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("Instance: transition entry out of [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("Instance: transition row does not sum to 1");
  }

  // (1-q0_j) P(do(X_j=0)) + q0_j P(do(X_j=1)) = P(do()) componentwise.
  const auto row_do = transitions_.row(0);
  for (int j = 1; j <= n_; ++j) {
    const double qj = start_.q[static_cast<std::size_t>(j - 1)];
    const auto r0 = transitions_.row(static_cast<std::size_t>(intervention_index(Intervention::set(j, 0))));
    const auto r1 = transitions_.row(static_cast<std::size_t>(intervention_index(Intervention::set(j, 1))));
    for (std::size_t c = 0; c < static_cast<std::size_t>(k_); ++c) {
      const double lhs = (1.0 - qj) * r0[c] + qj * r1[c];
      if (std::abs(lhs - row_do[c]) > kConsistencyTol)
        throw std::invalid_argument("Instance: consistency identity violated for variable " +
                                    std::to_string(j));
    }
  }
}

void Instance::build_coupling() {
  const auto row_do = transitions_.row(0);
  theta_ = Matrix(static_cast<std::size_t>(k_), static_cast<std::size_t>(n_));
  double pp = 1.0;
  for (std::size_t r = 0; r < transitions_.rows(); ++r)
    for (std::size_t c = 0; c < transitions_.cols(); ++c) {
      const double p = transitions_(r, c);
      if (p > 0.0) pp = std::min(pp, p);
    }
  p_plus_ = pp;

  // P{X_j=1 | state i} under do(); well defined whenever the state is
  // reachable under do().  The consistency identity keeps it in [0,1].
  for (int i = 1; i <= k_; ++i) {
    const double u = row_do[static_cast<std::size_t>(i - 1)];
    for (int j = 1; j <= n_; ++j) {
      double theta = start_.q[static_cast<std::size_t>(j - 1)];
      if (u > 0.0) {
        const auto r1 =
            transitions_.row(static_cast<std::size_t>(intervention_index(Intervention::set(j, 1))));
        theta = start_.q[static_cast<std::size_t>(j - 1)] * r1[static_cast<std::size_t>(i - 1)] / u;
        theta = std::clamp(theta, 0.0, 1.0);
      }
      theta_(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) = theta;
    }
  }
}

double expected_reward(const Instance& inst, int state, const Intervention& a) {
  if (state < 1 || state > inst.k()) throw std::invalid_argument("expected_reward: bad state");
  const StateModel& sm = inst.mid(state);
  const RewardModel& rm = sm.reward;
  if (rm.overrides.empty()) return rm.base;

  // Only variables referenced by overrides matter; enumerate their joint
  // support exactly (at most one per (var, value) pair keeps this tiny).
  std::vector<int> vars;
  for (const auto& o : rm.overrides)
    if (std::find(vars.begin(), vars.end(), o.var) == vars.end()) vars.push_back(o.var);
  if (vars.size() > 20) throw std::invalid_argument("expected_reward: too many override variables");

  std::vector<std::uint8_t> assignment(static_cast<std::size_t>(inst.n()), 0);
  double total = 0.0;
  const std::size_t combos = static_cast<std::size_t>(1) << vars.size();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    double prob = 1.0;
    for (std::size_t t = 0; t < vars.size(); ++t) {
      const int var = vars[t];
      const int bit = (mask >> t) & 1u;
      double p1 = sm.q[static_cast<std::size_t>(var - 1)];
      if (a.is_set() && a.var == var) p1 = static_cast<double>(a.value);
      prob *= bit ? p1 : (1.0 - p1);
      assignment[static_cast<std::size_t>(var - 1)] = static_cast<std::uint8_t>(bit);
    }
    if (prob == 0.0) continue;
    total += prob * rm.success_prob(assignment);
  }
  return total;
}

double policy_value(const Instance& inst, const Policy& pi) {
  if (pi.intermediate_actions.size() != static_cast<std::size_t>(inst.k()))
    throw std::invalid_argument("policy_value: policy has wrong number of intermediate actions");
  const auto row = inst.row(pi.start_action);
  double value = 0.0;
  for (int i = 1; i <= inst.k(); ++i)
    value += expected_reward(inst, i, pi.intermediate_actions[static_cast<std::size_t>(i - 1)]) *
             row[static_cast<std::size_t>(i - 1)];
  return value;
}

std::pair<Policy, double> optimal_policy(const Instance& inst) {
  const auto& order = inst.intervention_order();
  Policy best;
  best.intermediate_actions.resize(static_cast<std::size_t>(inst.k()));
  std::vector<double> best_reward(static_cast<std::size_t>(inst.k()));
  for (int i = 1; i <= inst.k(); ++i) {
    double r_best = -1.0;
    Intervention a_best;
    for (const auto& a : order) {
      const double r = expected_reward(inst, i, a);
      if (r > r_best) {
        r_best = r;
        a_best = a;
      }
    }
    best.intermediate_actions[static_cast<std::size_t>(i - 1)] = a_best;
    best_reward[static_cast<std::size_t>(i - 1)] = r_best;
  }
  double v_best = -1.0;
  for (const auto& b : order) {
    const auto row = inst.row(b);
    double v = 0.0;
    for (int i = 1; i <= inst.k(); ++i)
      v += best_reward[static_cast<std::size_t>(i - 1)] * row[static_cast<std::size_t>(i - 1)];
    if (v > v_best) {
      v_best = v;
      best.start_action = b;
    }
  }
  return {best, v_best};
}

MResult true_m(std::span<const double> q) {
  if (q.empty()) throw std::invalid_argument("true_m: empty q");
  struct Item {
    double folded;
    int var;
    int minority;
  };
  std::vector<Item> items;
  items.reserve(q.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double qj = q[j];
    if (!(qj >= 0.0 && qj <= 1.0)) throw std::invalid_argument("true_m: q out of [0,1]");
    const int minority = qj <= 0.5 ? 1 : 0;
    items.push_back({std::min(qj, 1.0 - qj), static_cast<int>(j) + 1, minority});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.folded < b.folded; });
  // q_(j) increasing vs 1/j decreasing: the qualifying set is a prefix.
  int m = 0;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j].folded < 1.0 / static_cast<double>(j + 1))
      m = static_cast<int>(j) + 1;
    else
      break;
  }
  MResult res;
  res.m = m;
  for (int j = 0; j < m; ++j)
    res.interventions.push_back(
        Intervention::set(items[static_cast<std::size_t>(j)].var,
                          items[static_cast<std::size_t>(j)].minority));
  return res;
}

double lower_bound_beta(double sum_m, double T) {
  return std::min(1.0 / 3.0, std::sqrt(sum_m / (18.0 * T)));
}

Instance make_experiment_instance(int n, int k, int m, int m0, double eps) {
  if (k != n) throw std::invalid_argument("make_experiment_instance: requires k == n");
  if (k < 2) throw std::invalid_argument("make_experiment_instance: requires k >= 2");
  if (m < 1 || m > n) throw std::invalid_argument("make_experiment_instance: m out of [1, n]");
  if (m0 < 0 || m0 > n) throw std::invalid_argument("make_experiment_instance: m0 out of [0, n]");
  // eps = 0 gives the degenerate all-policies-optimal instance.
  if (!(eps >= 0.0 && eps <= 0.5)) throw std::invalid_argument("make_experiment_instance: eps out of [0, 0.5]");

  StateModel start;
  start.q.assign(static_cast<std::size_t>(n), 0.5);
  for (int j = 1; j <= m0; ++j) start.q[static_cast<std::size_t>(j - 1)] = 0.0;

  std::vector<StateModel> mids(static_cast<std::size_t>(k));
  for (int i = 1; i <= k; ++i) {
    StateModel& sm = mids[static_cast<std::size_t>(i - 1)];
    sm.q.assign(static_cast<std::size_t>(n), 0.5);
    for (int j = 1; j <= m; ++j) sm.q[static_cast<std::size_t>(j - 1)] = 0.0;
    sm.reward.base = 0.5;
    if (i == 1) sm.reward.overrides.push_back({1, 1, 0.5 + eps});
  }

  const int N = num_interventions(n);
  Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
  const double uniform = 1.0 / static_cast<double>(k);
  const double boosted = 2.0 / static_cast<double>(k);
  const double off = 1.0 / static_cast<double>(k) - 1.0 / (static_cast<double>(k) * (k - 1));
  for (int c = 0; c < k; ++c) P(0, static_cast<std::size_t>(c)) = uniform;
  for (int i = 1; i <= n; ++i) {
    const std::size_t r1 = static_cast<std::size_t>(intervention_index(Intervention::set(i, 1)));
    const std::size_t r0 = static_cast<std::size_t>(intervention_index(Intervention::set(i, 0)));
    for (int c = 1; c <= k; ++c)
      P(r1, static_cast<std::size_t>(c - 1)) = (c == i) ? boosted : off;
    const double q0i = start.q[static_cast<std::size_t>(i - 1)];
    if (q0i == 0.0) {
      // Identity degenerates: the do(X_i=0) row equals the do() row and the
      // do(X_i=1) row stays as specified above.
      for (int c = 0; c < k; ++c) P(r0, static_cast<std::size_t>(c)) = uniform;
    } else {
      for (int c = 0; c < k; ++c) {
        const double v = (P(0, static_cast<std::size_t>(c)) -
                          q0i * P(r1, static_cast<std::size_t>(c))) /
                         (1.0 - q0i);
        if (v < -1e-12 || v > 1.0 + 1e-12)
          throw std::invalid_argument("make_experiment_instance: derived row leaves [0,1]");
        P(r0, static_cast<std::size_t>(c)) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return Instance(n, k, std::move(start), std::move(mids), std::move(P));
}

Instance make_lower_bound_instance(int k, std::optional<std::pair<int, Intervention>> target,
                                   double beta) {
  if (k <= 1) throw std::invalid_argument("make_lower_bound_instance: requires k > 1");
  if (target && !(beta > 0.0 && beta < 0.5))
    throw std::invalid_argument("make_lower_bound_instance: beta out of (0, 0.5)");
  const int n = k - 1;

  StateModel start;
  start.q.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<StateModel> mids(static_cast<std::size_t>(k));
  for (auto& sm : mids) {
    sm.q.assign(static_cast<std::size_t>(n), 0.0);
    sm.reward.base = 0.5;
  }

  if (target) {
    const int state = target->first;
    const Intervention a = target->second;
    if (state < 1 || state > k) throw std::invalid_argument("make_lower_bound_instance: bad target state");
    StateModel& sm = mids[static_cast<std::size_t>(state - 1)];
    if (a.is_set()) {
      if (a.var < 1 || a.var > n) throw std::invalid_argument("make_lower_bound_instance: bad target var");
      // Make the target value never occur naturally so only the explicit
      // intervention pays the boosted reward.
      sm.q[static_cast<std::size_t>(a.var - 1)] = a.value == 1 ? 0.0 : 1.0;
      sm.reward.overrides.push_back({a.var, a.value, 0.5 + beta});
    } else {
      // A do() target cannot pay strictly more than every single-variable
      // intervention under an assignment-driven reward (the do() value is a
      // mixture of the do(X_j=.) values).  Realize E[R|do()] = 0.5+beta via
      // an always-matching override; do() still attains the optimum and wins
      // ties by canonical order.
      sm.reward.overrides.push_back({1, 0, 0.5 + beta});
    }
  }

  const int N = num_interventions(n);
  Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k), 0.0);
  for (int r = 0; r < N; ++r) P(static_cast<std::size_t>(r), static_cast<std::size_t>(k - 1)) = 1.0;
  for (int i = 1; i <= n; ++i) {
    const std::size_t r1 = static_cast<std::size_t>(intervention_index(Intervention::set(i, 1)));
    P(r1, static_cast<std::size_t>(k - 1)) = 0.0;
    P(r1, static_cast<std::size_t>(i - 1)) = 1.0;
  }
  return Instance(n, k, std::move(start), std::move(mids), std::move(P));
}

// ---------------------------------------------------------------------------
// Text serialization
// ---------------------------------------------------------------------------

std::string write_instance_text(const Instance& inst) {
  std::ostringstream os;
  os << "causal_mdp_instance 1\n";
  os << "n " << inst.n() << "\n";
  os << "k " << inst.k() << "\n";
  auto write_state = [&](const StateModel& sm, int index) {
    os << "state " << index << "\n";
    os << "q";
    for (double qj : sm.q) os << " " << format_double(qj);
    os << "\n";
    os << "reward_base " << format_double(sm.reward.base) << "\n";
    for (const auto& o : sm.reward.overrides)
      os << "override " << o.var << " " << o.value << " " << format_double(o.prob) << "\n";
  };
  write_state(inst.start(), 0);
  for (int i = 1; i <= inst.k(); ++i) write_state(inst.mid(i), i);
  os << "transitions\n";
  for (std::size_t r = 0; r < inst.transitions().rows(); ++r) {
    const auto row = inst.transitions().row(r);
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << format_double(row[c]);
    os << "\n";
  }
  os << "end\n";
  return os.str();
}

Instance read_instance_text(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  auto expect = [&](const std::string& want) {
    if (!(is >> tok) || tok != want)
      throw ParseError("instance text: expected '" + want + "', got '" + tok + "'");
  };
  expect("causal_mdp_instance");
  int version = 0;
  if (!(is >> version) || version != 1) throw ParseError("instance text: unsupported version");
  expect("n");
  int n = 0;
  if (!(is >> n)) throw ParseError("instance text: bad n");
  expect("k");
  int k = 0;
  if (!(is >> k)) throw ParseError("instance text: bad k");

  if (!(is >> tok)) throw ParseError("instance text: truncated");
  // `tok` holds one token of lookahead from here on.
  auto read_state = [&](int index) {
    if (tok != "state") throw ParseError("instance text: expected 'state'");
    int got = -1;
    if (!(is >> got) || got != index) throw ParseError("instance text: states out of order");
    std::string inner;
    if (!(is >> inner) || inner != "q") throw ParseError("instance text: expected 'q'");
    StateModel sm;
    sm.q.resize(static_cast<std::size_t>(n));
    for (auto& qj : sm.q)
      if (!(is >> qj)) throw ParseError("instance text: bad q value");
    if (!(is >> inner) || inner != "reward_base")
      throw ParseError("instance text: expected 'reward_base'");
    if (!(is >> sm.reward.base)) throw ParseError("instance text: bad reward base");
    while (is >> tok && tok == "override") {
      RewardOverride o;
      if (!(is >> o.var >> o.value >> o.prob)) throw ParseError("instance text: bad override");
      sm.reward.overrides.push_back(o);
    }
    return sm;
  };

  StateModel start = read_state(0);
  std::vector<StateModel> mids;
  for (int i = 1; i <= k; ++i) mids.push_back(read_state(i));
  if (tok != "transitions") throw ParseError("instance text: expected 'transitions'");
  const int N = num_interventions(n);
  Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < k; ++c)
      if (!(is >> P(static_cast<std::size_t>(r), static_cast<std::size_t>(c))))
        throw ParseError("instance text: bad transition entry");
  expect("end");
  return Instance(n, k, std::move(start), std::move(mids), std::move(P));
}

}  // namespace cmdp
