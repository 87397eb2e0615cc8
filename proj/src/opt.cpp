#include "cmdp/opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "cmdp/env.hpp"

namespace cmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFloorMix = 1e-12;  // per-coordinate floor on iterates

void validate_problem(const Matrix& P, const std::vector<double>& m) {
  if (P.rows() == 0 || P.cols() == 0) throw std::invalid_argument("opt: empty matrix");
  if (m.size() != P.cols()) throw std::invalid_argument("opt: m length must match columns");
  for (double mi : m)
    if (!(mi > 0.0)) throw std::invalid_argument("opt: m entries must be positive");
  for (std::size_t c = 0; c < P.cols(); ++c) {
    bool reachable = false;
    for (std::size_t r = 0; r < P.rows(); ++r)
      if (P(r, c) > 0.0) {
        reachable = true;
        break;
      }
    if (!reachable) throw std::invalid_argument("opt: column " + std::to_string(c + 1) + " unreachable");
  }
}

void reach_probabilities(const Matrix& P, std::span<const double> f, std::vector<double>& w) {
  const std::size_t N = P.rows(), k = P.cols();
  w.assign(k, 0.0);
  for (std::size_t a = 0; a < N; ++a) {
    const double fa = f[a];
    if (fa == 0.0) continue;
    const auto row = P.row(a);
    for (std::size_t i = 0; i < k; ++i) w[i] += fa * row[i];
  }
}

// Row values g_a = sum_i P_ai sqrt(m_i)/sqrt(w_i); +inf rows touch a zero w.
// Scratch buffers are caller-owned to keep the solver loop allocation free.
double row_values(const Matrix& P, std::span<const double> sqrt_m, std::span<const double> w,
                  std::vector<double>& g_rows, std::vector<double>& inv_sqrt_w) {
  const std::size_t N = P.rows(), k = P.cols();
  g_rows.resize(N);
  inv_sqrt_w.resize(k);
  for (std::size_t i = 0; i < k; ++i) inv_sqrt_w[i] = w[i] > 0.0 ? 1.0 / std::sqrt(w[i]) : kInf;
  double g_max = 0.0;
  for (std::size_t a = 0; a < N; ++a) {
    const auto row = P.row(a);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (row[i] == 0.0) continue;
      if (w[i] <= 0.0) {
        s = kInf;
        break;
      }
      s += row[i] * sqrt_m[i] * inv_sqrt_w[i];
    }
    g_rows[a] = s;
    g_max = std::max(g_max, s);
  }
  return g_max;
}

void normalize_with_floor(std::vector<double>& f) {
  double sum = 0.0;
  for (double x : f) sum += x;
  const std::size_t n = f.size();
  const double delta = kFloorMix * static_cast<double>(n);
  for (auto& x : f) x = (1.0 - delta) * (x / sum) + kFloorMix;
  double sum2 = 0.0;
  for (double x : f) sum2 += x;
  for (auto& x : f) x /= sum2;
}

}  // namespace

double minmax_objective(const MinMaxProblem& prob, const FrequencyVector& f) {
  if (f.size() != prob.P.rows()) throw std::invalid_argument("objective: f has wrong length");
  std::vector<double> sqrt_m(prob.m.size());
  for (std::size_t i = 0; i < prob.m.size(); ++i) sqrt_m[i] = std::sqrt(prob.m[i]);
  std::vector<double> w, g_rows, scratch;
  reach_probabilities(prob.P, f.w, w);
  return row_values(prob.P, sqrt_m, w, g_rows, scratch);
}

SolveReport solve_min_max(const MinMaxProblem& prob, const SolveOptions& opts) {
  validate_problem(prob.P, prob.m);
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solve_min_max: tol must be positive");
  const std::size_t N = prob.P.rows(), k = prob.P.cols();
  std::vector<double> sqrt_m(k);
  for (std::size_t i = 0; i < k; ++i) sqrt_m[i] = std::sqrt(prob.m[i]);
  const double logN = std::log(static_cast<double>(std::max<std::size_t>(N, 2)));

  std::vector<double> f(N, 1.0 / static_cast<double>(N));
  std::vector<double> w, g_rows, scratch, soft(N), t_agg(k), grad(N);

  std::vector<double> best_f = f;
  reach_probabilities(prob.P, f, w);
  double best_g = row_values(prob.P, sqrt_m, w, g_rows, scratch);
  double lb_best = 0.0;

  auto gap_squared = [&]() {
    if (lb_best <= 0.0) return kInf;
    return best_g * best_g - lb_best * lb_best;
  };

  // Temperature starts at a fraction of the objective scale and is at least
  // halved each restart; each restart warm-starts from the incumbent.
  double tau = std::max(1e-9, 0.05 * best_g / logN);
  const double step_c = 1.0;  // calibrated on the deterministic-matrix family
  const double material = 1e-11;

  int total_iters = 0;
  int stale_restarts = 0;
  double gap_at_last_restart = kInf;
  while (total_iters < opts.max_iters && gap_squared() > opts.tol && stale_restarts < 3) {
    f = best_f;
    normalize_with_floor(f);
    const int inner_budget =
        std::max(500, opts.max_iters / (4 * std::max(opts.restarts, 1)));
    int since_improvement = 0;
    for (int t = 1; t <= inner_budget && total_iters < opts.max_iters; ++t, ++total_iters) {
      reach_probabilities(prob.P, f, w);
      const double g_true = row_values(prob.P, sqrt_m, w, g_rows, scratch);
      bool improved = false;
      if (g_true < best_g - material * (1.0 + best_g)) {
        improved = true;
      }
      if (g_true < best_g) {
        best_g = g_true;
        best_f = f;
      }

      // Softmax over rows at temperature tau (subgradient of the smoothed max).
      double g_max = -kInf;
      for (double v : g_rows) g_max = std::max(g_max, v);
      double soft_sum = 0.0;
      for (std::size_t a = 0; a < N; ++a) {
        soft[a] = std::exp(std::max((g_rows[a] - g_max) / tau, -700.0));
        soft_sum += soft[a];
      }
      const double h_tau = g_max + tau * std::log(soft_sum);
      for (auto& s : soft) s /= soft_sum;

      for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t a = 0; a < N; ++a)
          if (soft[a] > 0.0 && prob.P(a, i) != 0.0) acc += soft[a] * prob.P(a, i);
        t_agg[i] = acc;
      }
      double grad_min = kInf, grad_max = -kInf, grad_dot_f = 0.0;
      for (std::size_t b = 0; b < N; ++b) {
        double acc = 0.0;
        const auto row = prob.P.row(b);
        for (std::size_t i = 0; i < k; ++i) {
          if (row[i] == 0.0 || t_agg[i] == 0.0) continue;
          acc += row[i] * sqrt_m[i] * t_agg[i] / (w[i] * std::sqrt(w[i]));
        }
        grad[b] = -0.5 * acc;
        grad_min = std::min(grad_min, grad[b]);
        grad_max = std::max(grad_max, grad[b]);
        grad_dot_f += grad[b] * f[b];
      }

      // Two lower bounds on min_f g.  Linearization: h_tau - tau log N
      // lower-bounds g, and its supporting hyperplane at f bounds the
      // simplex minimum.  Dual: for any row weights s,
      //   min_f g >= min_{w in simplex} sum_i sqrt(m_i) (P^T s)_i / sqrt(w_i)
      //            = (sum_i (sqrt(m_i) (P^T s)_i)^{2/3})^{3/2},
      // using that P^T f always lies inside the simplex.
      const double lb_lin = h_tau - tau * logN + grad_min - grad_dot_f;
      double dual_soft = 0.0, dual_self = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        dual_soft += std::pow(sqrt_m[i] * t_agg[i], 2.0 / 3.0);
        dual_self += std::pow(sqrt_m[i] * w[i], 2.0 / 3.0);
      }
      const double lb = std::max(lb_lin, std::pow(std::max(dual_soft, dual_self), 1.5));
      if (lb > lb_best + material * (1.0 + std::abs(lb_best))) improved = true;
      if (lb > lb_best) lb_best = lb;
      if (gap_squared() <= opts.tol) break;
      since_improvement = improved ? 0 : since_improvement + 1;
      if (since_improvement > 400) break;  // stalled at this temperature

      // Constant gradient components cancel in the multiplicative update, so
      // scale steps by the spread, not the magnitude.  The certified bound
      // caps the step Polyak-style once the gap is small.
      const double spread = grad_max - grad_min;
      if (spread <= 0.0) break;
      const double eta = std::min(step_c / (std::sqrt(static_cast<double>(t)) * spread),
                                  (h_tau - lb_best) / (spread * spread));
      for (std::size_t b = 0; b < N; ++b)
        f[b] *= std::exp(std::clamp(-eta * (grad[b] - grad_min), -700.0, 700.0));
      normalize_with_floor(f);
    }
    // At least halve; drop faster once the remaining gap is known.
    double next = tau / 2.0;
    if (lb_best > 0.0 && best_g > lb_best)
      next = std::min(next, std::max((best_g - lb_best) / (4.0 * logN), 1e-14));
    tau = std::max(next, 1e-14);
    // A restart that fails to shrink the gap by 2% counts as stale; three in
    // a row and the certificate is declared out of reach.
    const double gap_now = gap_squared();
    if (gap_now > 0.98 * gap_at_last_restart)
      stale_restarts += 1;
    else
      stale_restarts = 0;
    gap_at_last_restart = gap_now;
  }

  SolveReport rep;
  double sum = 0.0;
  for (double x : best_f) sum += x;
  for (auto& x : best_f) x /= sum;
  rep.minimizer.w = std::move(best_f);
  rep.objective_value = best_g;
  rep.objective_squared = best_g * best_g;
  rep.iterations = total_iters;
  rep.certified_gap = std::max(gap_squared(), 0.0);
  rep.converged = rep.certified_gap <= opts.tol;
  return rep;
}

FrequencyVector solve_max_min_reach(const Matrix& P_hat, double tol) {
  if (P_hat.rows() == 0 || P_hat.cols() == 0)
    throw std::invalid_argument("solve_max_min_reach: empty matrix");
  for (std::size_t c = 0; c < P_hat.cols(); ++c) {
    bool reachable = false;
    for (std::size_t r = 0; r < P_hat.rows(); ++r)
      if (P_hat(r, c) > 0.0) {
        reachable = true;
        break;
      }
    if (!reachable)
      throw UnreachableStateError("solve_max_min_reach: column " + std::to_string(c + 1) +
                                  " unreachable");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("solve_max_min_reach: tol must be positive");

  const std::size_t N = P_hat.rows(), k = P_hat.cols();
  const double logk = std::log(static_cast<double>(std::max<std::size_t>(k, 2)));
  const int max_iters = 100000;

  std::vector<double> f(N, 1.0 / static_cast<double>(N));
  std::vector<double> w, soft(k), grad(N);

  auto phi = [&](const std::vector<double>& x) {
    reach_probabilities(P_hat, x, w);
    double v = kInf;
    for (double wi : w) v = std::min(v, wi);
    return v;
  };

  std::vector<double> best_f = f;
  double best_phi = phi(f);
  double ub_best = kInf;

  struct Candidate {
    double value;
    double entropy;
    std::vector<double> f;
  };
  std::vector<Candidate> candidates;
  auto entropy_of = [](const std::vector<double>& x) {
    double h = 0.0;
    for (double v : x)
      if (v > 0.0) h -= v * std::log(v);
    return h;
  };
  auto consider_candidate = [&](double value, const std::vector<double>& x) {
    if (value < best_phi - tol) return;
    candidates.push_back({value, entropy_of(x), x});
    if (candidates.size() > 64) {
      // Drop qualifying-but-lowest-entropy entries first.
      auto lowest = std::min_element(candidates.begin(), candidates.end(),
                                     [](const Candidate& a, const Candidate& b) {
                                       return a.entropy < b.entropy;
                                     });
      candidates.erase(lowest);
    }
  };

  double tau = std::max(1e-9, 0.1 * std::max(best_phi, 1e-3) / logk);
  const double material = 1e-11;
  int total_iters = 0;
  int stale_restarts = 0;
  double gap_at_last_restart = kInf;
  while (total_iters < max_iters && ub_best - best_phi > tol && stale_restarts < 3) {
    f = best_f;
    normalize_with_floor(f);
    int since_improvement = 0;
    const int inner_budget = std::max(500, max_iters / 20);
    for (int t = 1; t <= inner_budget && total_iters < max_iters; ++t, ++total_iters) {
      reach_probabilities(P_hat, f, w);
      double w_min = kInf;
      for (double wi : w) w_min = std::min(w_min, wi);
      bool improved = false;
      if (w_min > best_phi + material) improved = true;
      if (w_min > best_phi) {
        best_phi = w_min;
        best_f = f;
      }
      consider_candidate(w_min, f);

      // Softmin over states at temperature tau.
      double soft_sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        soft[i] = std::exp(std::max(-(w[i] - w_min) / tau, -700.0));
        soft_sum += soft[i];
      }
      for (auto& s : soft) s /= soft_sum;

      double grad_min = kInf, grad_max = -kInf;
      for (std::size_t b = 0; b < N; ++b) {
        double acc = 0.0;
        const auto row = P_hat.row(b);
        for (std::size_t i = 0; i < k; ++i) acc += soft[i] * row[i];
        grad[b] = acc;
        grad_min = std::min(grad_min, acc);
        grad_max = std::max(grad_max, acc);
      }

      // LP duality: min_i w_i <= sigma^T w <= max_b (P sigma)_b for any
      // state distribution sigma, so the largest gradient coordinate is an
      // upper bound on the optimum.
      const double ub = grad_max;
      if (ub < ub_best - material) improved = true;
      if (ub < ub_best) ub_best = ub;
      if (ub_best - best_phi <= tol) break;
      since_improvement = improved ? 0 : since_improvement + 1;
      if (since_improvement > 400) break;

      const double spread = grad_max - grad_min;
      if (spread <= 0.0) break;  // objective constant in f
      const double eta = std::min(1.0 / (std::sqrt(static_cast<double>(t)) * spread),
                                  (ub_best - w_min) / (spread * spread));
      for (std::size_t b = 0; b < N; ++b)
        f[b] *= std::exp(std::clamp(eta * grad[b], -700.0, 700.0));
      normalize_with_floor(f);
    }
    double next = tau / 2.0;
    if (ub_best < kInf)
      next = std::min(next, std::max((ub_best - best_phi) / (4.0 * logk), 1e-14));
    tau = std::max(next, 1e-14);
    const double gap_now = ub_best - best_phi;
    if (gap_now > 0.98 * gap_at_last_restart)
      stale_restarts += 1;
    else
      stale_restarts = 0;
    gap_at_last_restart = gap_now;
  }

  // Maximum entropy among the epsilon-optimal candidates found.
  const Candidate* pick = nullptr;
  for (const auto& c : candidates) {
    if (c.value < best_phi - tol) continue;
    if (!pick || c.entropy > pick->entropy) pick = &c;
  }
  FrequencyVector out;
  out.w = pick ? pick->f : best_f;
  double sum = 0.0;
  for (double x : out.w) sum += x;
  for (auto& x : out.w) x /= sum;
  return out;
}

GridResult grid_oracle(const MinMaxProblem& prob, double resolution) {
  validate_problem(prob.P, prob.m);
  if (!(resolution > 0.0 && resolution <= 0.1))
    throw std::invalid_argument("grid_oracle: resolution out of (0, 0.1]");
  const std::size_t N = prob.P.rows(), k = prob.P.cols();

  // Pool interventions with identical rows; the objective depends on f only
  // through the mass given to each row class.
  std::vector<std::size_t> class_rep;   // row index of first member
  std::vector<std::size_t> class_of(N);
  for (std::size_t a = 0; a < N; ++a) {
    bool found = false;
    for (std::size_t c = 0; c < class_rep.size(); ++c) {
      const auto ra = prob.P.row(a), rc = prob.P.row(class_rep[c]);
      if (std::equal(ra.begin(), ra.end(), rc.begin())) {
        class_of[a] = c;
        found = true;
        break;
      }
    }
    if (!found) {
      class_of[a] = class_rep.size();
      class_rep.push_back(a);
    }
  }
  const std::size_t C = class_rep.size();
  if (C > 7) throw InfeasibleOracleError("grid_oracle: " + std::to_string(C) + " row classes");

  const long steps = std::lround(1.0 / resolution);
  double lattice_size = 1.0;
  for (long i = 1; i < static_cast<long>(C); ++i)
    lattice_size *= static_cast<double>(steps + i) / static_cast<double>(i);
  if (lattice_size > 3e8) throw InfeasibleOracleError("grid_oracle: lattice too large");

  std::vector<double> sqrt_m(k);
  for (std::size_t i = 0; i < k; ++i) sqrt_m[i] = std::sqrt(prob.m[i]);

  std::vector<long> parts(C, 0);
  std::vector<double> w(k), best_parts;
  double best = kInf;

  // Depth-first over compositions of `steps` into C parts, accumulating w.
  std::vector<double> w_stack((C + 1) * k, 0.0);
  auto eval_leaf = [&]() {
    const double* wl = &w_stack[C * k];
    double g = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const auto row = prob.P.row(class_rep[c]);
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (row[i] == 0.0) continue;
        if (wl[i] <= 0.0) {
          s = kInf;
          break;
        }
        s += row[i] * sqrt_m[i] / std::sqrt(wl[i]);
      }
      g = std::max(g, s);
      if (g == kInf) break;
    }
    if (g < best) {
      best = g;
      best_parts.assign(parts.begin(), parts.end());
    }
  };

  auto dfs = [&](auto&& self, std::size_t c, long remaining) -> void {
    if (c + 1 == C) {
      parts[c] = remaining;
      const double* wp = &w_stack[c * k];
      double* wn = &w_stack[(c + 1) * k];
      const auto row = prob.P.row(class_rep[c]);
      const double rho = static_cast<double>(remaining) / static_cast<double>(steps);
      for (std::size_t i = 0; i < k; ++i) wn[i] = wp[i] + rho * row[i];
      eval_leaf();
      return;
    }
    for (long units = 0; units <= remaining; ++units) {
      parts[c] = units;
      const double* wp = &w_stack[c * k];
      double* wn = &w_stack[(c + 1) * k];
      const auto row = prob.P.row(class_rep[c]);
      const double rho = static_cast<double>(units) / static_cast<double>(steps);
      for (std::size_t i = 0; i < k; ++i) wn[i] = wp[i] + rho * row[i];
      self(self, c + 1, remaining - units);
    }
  };
  dfs(dfs, 0, steps);

  GridResult res;
  res.value = best * best;
  res.f.w.assign(N, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    res.f.w[class_rep[c]] = static_cast<double>(best_parts[c]) / static_cast<double>(steps);
  return res;
}

bool convexity_chord_check(const MinMaxProblem& prob, int trials, RandomStream& rng) {
  if (trials < 1) throw std::invalid_argument("convexity_chord_check: trials must be >= 1");
  const std::size_t N = prob.P.rows();
  auto interior_point = [&]() {
    FrequencyVector f;
    f.w.resize(N);
    double sum = 0.0;
    for (auto& x : f.w) {
      x = -std::log(std::max(rng.uniform01(), 1e-300));
      sum += x;
    }
    for (auto& x : f.w) x = 0.999 * (x / sum) + 0.001 / static_cast<double>(N);
    return f;
  };
  for (int t = 0; t < trials; ++t) {
    const FrequencyVector f1 = interior_point();
    const FrequencyVector f2 = interior_point();
    const double lam = std::clamp(rng.uniform01(), 1e-9, 1.0 - 1e-9);
    FrequencyVector mid;
    mid.w.resize(N);
    for (std::size_t b = 0; b < N; ++b) mid.w[b] = lam * f1.w[b] + (1.0 - lam) * f2.w[b];
    const double g1 = minmax_objective(prob, f1);
    const double g2 = minmax_objective(prob, f2);
    const double gm = minmax_objective(prob, mid);
    if (gm > lam * g1 + (1.0 - lam) * g2 + 1e-9) return false;
  }
  return true;
}

// Declared in env.hpp; lives here so env stays independent of the solver.
std::pair<double, FrequencyVector> lambda_of(const Matrix& P, const std::vector<double>& m,
                                             const SolveOptions& opts) {
  for (std::size_t c = 0; c < P.cols(); ++c) {
    bool reachable = false;
    for (std::size_t r = 0; r < P.rows(); ++r)
      if (P(r, c) > 0.0) {
        reachable = true;
        break;
      }
    if (!reachable)
      throw UnreachableStateError("lambda_of: state " + std::to_string(c + 1) +
                                  " unreachable under every intervention");
  }
  const SolveReport rep = solve_min_max({P, m}, opts);
  return {rep.objective_squared, rep.minimizer};
}

std::pair<double, FrequencyVector> lambda_of(const Matrix& P, const std::vector<double>& m) {
  return lambda_of(P, m, SolveOptions{});
}

}  // namespace cmdp
