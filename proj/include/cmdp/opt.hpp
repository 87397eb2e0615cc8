#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cmdp/core.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

// Point on the probability simplex over start-state interventions.
struct FrequencyVector {
  std::vector<double> w;

  static FrequencyVector uniform(std::size_t n) {
    FrequencyVector f;
    f.w.assign(n, 1.0 / static_cast<double>(n));
    return f;
  }

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }

  double entropy() const {
    double h = 0.0;
    for (double x : w)
      if (x > 0.0) h -= x * std::log(x);
    return h;
  }

  // Sum within 1e-12 of 1, all entries nonnegative.
  bool on_simplex(double tol = 1e-12) const {
    double s = 0.0;
    for (double x : w) {
      if (x < 0.0) return false;
      s += x;
    }
    return std::abs(s - 1.0) <= tol;
  }
};

// min over frequency vectors f of  max_a sum_i P_ai sqrt(m_i) / sqrt((P^T f)_i).
struct MinMaxProblem {
  Matrix P;               // N x k, nonnegative
  std::vector<double> m;  // k positive reals (estimates allowed)
};

struct SolveOptions {
  double tol = 1e-4;       // certified gap target on the squared objective
  int max_iters = 200000;  // total iteration budget across restarts
  int restarts = 5;        // minimum number of temperature halvings
};

struct SolveReport {
  FrequencyVector minimizer;
  double objective_value = 0.0;  // un-squared max norm at the minimizer
  double objective_squared = 0.0;
  int iterations = 0;
  double certified_gap = std::numeric_limits<double>::infinity();  // squared scale
  bool converged = false;
};

// g(f) = max_a sum_i P_ai sqrt(m_i)/sqrt((P^T f)_i); +infinity when some
// reachable coordinate of P^T f is zero and a row touches it.
double minmax_objective(const MinMaxProblem& prob, const FrequencyVector& f);

// Exponentiated-subgradient descent on the simplex with a log-sum-exp
// smoothed max and decreasing temperature; certified against a linearization
// lower bound.  Iterates stay strictly positive.
SolveReport solve_min_max(const MinMaxProblem& prob, const SolveOptions& opts = {});

// argmax_f min_i (P^T f)_i, same first-order machinery on the concave
// objective; ties among epsilon-optimal candidates broken by maximum entropy.
FrequencyVector solve_max_min_reach(const Matrix& P_hat, double tol);

struct GridResult {
  double value = 0.0;  // squared objective at the best lattice point
  FrequencyVector f;
};

// Exhaustive lattice search over pooled masses per distinct-row class; the
// objective depends on f only through those masses.  Errors when pooling
// leaves more than 7 classes or the lattice would be astronomically large.
GridResult grid_oracle(const MinMaxProblem& prob, double resolution);

// Samples interior chords and checks g(t f1 + (1-t) f2) <= t g(f1) + (1-t) g(f2)
// within 1e-9; true iff every trial passes.
bool convexity_chord_check(const MinMaxProblem& prob, int trials, RandomStream& rng);

}  // namespace cmdp
