#include <doctest.h>

#include <cmath>
#include <limits>

#include "cmdp/env.hpp"
#include "cmdp/opt.hpp"

using namespace cmdp;

namespace {

// Deterministic transition matrix of the hard family: do(X_i=1) reaches
// state i, everything else reaches state k.
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

MinMaxProblem random_pooled_problem(RandomStream& rng, int max_k = 4) {
  const int k = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_k - 1)));
  const int C = 2 + static_cast<int>(rng.below(3));
  const int N = C + static_cast<int>(rng.below(5));
  std::vector<std::vector<double>> rows;
  for (int c = 0; c < C; ++c) {
    std::vector<double> r(static_cast<std::size_t>(k));
    double s = 0.0;
    for (auto& x : r) {
      x = 0.05 + rng.uniform01();
      s += x;
    }
    for (auto& x : r) x /= s;
    rows.push_back(std::move(r));
  }
  Matrix P(static_cast<std::size_t>(N), static_cast<std::size_t>(k));
  for (int a = 0; a < N; ++a) {
    const auto& r = rows[static_cast<std::size_t>(a < C ? a : static_cast<int>(rng.below(
                                                               static_cast<std::uint64_t>(C))))];
    for (int i = 0; i < k; ++i) P(static_cast<std::size_t>(a), static_cast<std::size_t>(i)) = r[static_cast<std::size_t>(i)];
  }
  std::vector<double> m(static_cast<std::size_t>(k));
  for (auto& mi : m) mi = 1.0 + 3.0 * rng.uniform01();
  return {std::move(P), std::move(m)};
}

}  // namespace

TEST_CASE("objective values") {
  // k = 1: normalization forces (P^T f) = 1.
  Matrix ones(5, 1, 1.0);
  CHECK(minmax_objective({ones, {4.0}}, FrequencyVector::uniform(5)) == doctest::Approx(2.0));

  // k = 2 deterministic, m = [1,1], f split between do() and do(X_1=1).
  Matrix det2 = deterministic_matrix(2);
  FrequencyVector f;
  f.w = {0.5, 0.0, 0.5};
  CHECK(minmax_objective({det2, {1.0, 1.0}}, f) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  // Zero mass on everything reaching state 1 makes the objective infinite.
  FrequencyVector g;
  g.w = {1.0, 0.0, 0.0};
  CHECK(minmax_objective({det2, {1.0, 1.0}}, g) == std::numeric_limits<double>::infinity());
}

TEST_CASE("solve_min_max on the deterministic family") {
  Matrix P = deterministic_matrix(3);
  const auto rep = solve_min_max({P, {2.0, 2.0, 2.0}});
  CHECK(rep.converged);
  CHECK(rep.objective_squared == doctest::Approx(6.0).epsilon(1e-3));
  CHECK(rep.certified_gap <= 1e-4);

  // Minimizer splits mass one third to each state: singleton rows carry it
  // directly, the state-3 class pools do() and the do(X_j=0) rows.
  const auto& f = rep.minimizer.w;
  const double to1 = f[static_cast<std::size_t>(intervention_index(Intervention::set(1, 1)))];
  const double to2 = f[static_cast<std::size_t>(intervention_index(Intervention::set(2, 1)))];
  const double to3 = f[0] + f[static_cast<std::size_t>(intervention_index(Intervention::set(1, 0)))] +
                     f[static_cast<std::size_t>(intervention_index(Intervention::set(2, 0)))];
  CHECK(to1 == doctest::Approx(1.0 / 3.0).epsilon(0.02));
  CHECK(to2 == doctest::Approx(1.0 / 3.0).epsilon(0.02));
  CHECK(to3 == doctest::Approx(1.0 / 3.0).epsilon(0.02));

  // Report invariant: stored objective matches a recomputation.
  CHECK(rep.objective_value ==
        doctest::Approx(minmax_objective({P, {2.0, 2.0, 2.0}}, rep.minimizer)).epsilon(1e-10));

  // Single state: any f is optimal.
  Matrix ones(3, 1, 1.0);
  const auto rep1 = solve_min_max({ones, {7.0}});
  CHECK(rep1.objective_squared == doctest::Approx(7.0).epsilon(1e-6));

  // Iterates stay on the simplex and strictly positive.
  CHECK(rep.minimizer.on_simplex());
  for (double x : rep.minimizer.w) CHECK(x > 0.0);
}

TEST_CASE("solve_min_max matches the grid oracle on random pooled problems") {
  RandomStream rng(20240);
  for (int trial = 0; trial < 10; ++trial) {
    const MinMaxProblem prob = random_pooled_problem(rng);
    const auto rep = solve_min_max(prob);
    const auto oracle = grid_oracle(prob, 0.005);
    CHECK(rep.objective_squared <= oracle.value + 1e-2);
    CHECK(rep.objective_squared >= oracle.value * 0.98);
  }
}

TEST_CASE("closed-form lambda across random m vectors") {
  RandomStream rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    Matrix P = deterministic_matrix(k);
    std::vector<double> m(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& mi : m) {
      mi = static_cast<double>(1 + rng.below(10));
      sum += mi;
    }
    const auto rep = solve_min_max({P, m});
    CHECK(std::abs(rep.objective_squared - sum) <= 1e-3);
  }
}

TEST_CASE("objective scales linearly in m") {
  RandomStream rng(77);
  const MinMaxProblem prob = random_pooled_problem(rng);
  MinMaxProblem scaled = prob;
  const double c = 3.7;
  for (auto& mi : scaled.m) mi *= c;
  for (int trial = 0; trial < 20; ++trial) {
    FrequencyVector f;
    f.w.resize(prob.P.rows());
    double s = 0.0;
    for (auto& x : f.w) {
      x = 0.01 + rng.uniform01();
      s += x;
    }
    for (auto& x : f.w) x /= s;
    const double g1 = minmax_objective(prob, f);
    const double g2 = minmax_objective(scaled, f);
    CHECK(g2 * g2 == doctest::Approx(c * g1 * g1).epsilon(1e-10));
  }
}

TEST_CASE("solve_max_min_reach") {
  // Deterministic k=3: optimum 1/3, entropy tie-break spreads the pooled class.
  Matrix P = deterministic_matrix(3);
  const auto f = solve_max_min_reach(P, 1e-4);
  std::vector<double> w(3, 0.0);
  for (std::size_t a = 0; a < P.rows(); ++a)
    for (int i = 0; i < 3; ++i) w[static_cast<std::size_t>(i)] += f.w[a] * P(a, static_cast<std::size_t>(i));
  for (double wi : w) CHECK(wi == doctest::Approx(1.0 / 3.0).epsilon(2e-3));
  // Within the pooled class the three members share mass evenly.
  CHECK(f.w[0] == doctest::Approx(1.0 / 9.0).epsilon(0.05));

  // All m = 1 deterministic family at k = 4: optimum value 1/k.
  Matrix P4 = deterministic_matrix(4);
  const auto f4 = solve_max_min_reach(P4, 1e-4);
  std::vector<double> w4(4, 0.0);
  for (std::size_t a = 0; a < P4.rows(); ++a)
    for (int i = 0; i < 4; ++i) w4[static_cast<std::size_t>(i)] += f4.w[a] * P4(a, static_cast<std::size_t>(i));
  double w_min = 1.0;
  for (double wi : w4) w_min = std::min(w_min, wi);
  CHECK(w_min == doctest::Approx(0.25).epsilon(2e-3));

  // Constant objective: uniform rows, any f optimal.
  Matrix uniform(3, 2, 0.5);
  const auto fu = solve_max_min_reach(uniform, 1e-4);
  CHECK(fu.on_simplex());

  // Unreachable column.
  Matrix dead(3, 2, 0.0);
  for (int r = 0; r < 3; ++r) dead(static_cast<std::size_t>(r), 0) = 1.0;
  CHECK_THROWS_AS(solve_max_min_reach(dead, 1e-4), UnreachableStateError);
}

TEST_CASE("grid_oracle") {
  Matrix P = deterministic_matrix(3);
  const auto res = grid_oracle({P, {2.0, 2.0, 2.0}}, 0.01);
  CHECK(res.value == doctest::Approx(6.0).epsilon(0.02));

  Matrix ones(3, 1, 1.0);
  CHECK(grid_oracle({ones, {3.0}}, 0.05).value == doctest::Approx(3.0).epsilon(1e-12));

  // Pooling keeps duplicate rows tractable: 9 rows but only 3 classes.
  Matrix dup(9, 3);
  for (int a = 0; a < 9; ++a)
    for (int i = 0; i < 3; ++i)
      dup(static_cast<std::size_t>(a), static_cast<std::size_t>(i)) = (a % 3 == i) ? 1.0 : 0.0;
  CHECK(grid_oracle({dup, {1.0, 1.0, 1.0}}, 0.01).value == doctest::Approx(3.0).epsilon(0.02));

  // Too many distinct rows.
  RandomStream rng(4);
  Matrix wide(9, 4);
  for (std::size_t a = 0; a < 9; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      wide(a, i) = 0.1 + rng.uniform01();
      s += wide(a, i);
    }
    for (std::size_t i = 0; i < 4; ++i) wide(a, i) /= s;
  }
  CHECK_THROWS_AS(grid_oracle({wide, {1.0, 1.0, 1.0, 1.0}}, 0.01), InfeasibleOracleError);
  CHECK_THROWS_AS(grid_oracle({ones, {3.0}}, 0.5), std::invalid_argument);
}

TEST_CASE("convexity chord check") {
  RandomStream rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const MinMaxProblem prob = random_pooled_problem(rng, 5);
    RandomStream chords = rng.split(static_cast<std::uint64_t>(trial));
    CHECK(convexity_chord_check(prob, 500, chords));
  }

  // Equal endpoints: the chord inequality is an equality.
  RandomStream rng2(9);
  const MinMaxProblem prob = random_pooled_problem(rng2);
  FrequencyVector f = FrequencyVector::uniform(prob.P.rows());
  const double g = minmax_objective(prob, f);
  CHECK(g == doctest::Approx(g).epsilon(1e-12));

  // Single-row problem: c (v^T f)^{-1/2} is convex along any chord.
  Matrix single(1, 1, 1.0);
  RandomStream rng3(10);
  CHECK(convexity_chord_check({single, {2.0}}, 100, rng3));
}
