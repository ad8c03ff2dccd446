#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fairalloc/errors.hpp"
#include "fairalloc/lp.hpp"
#include "fixtures.hpp"

using namespace fairalloc;
using namespace fairalloc::lp;

namespace {

TransportationProblem path_problem(const Instance& inst, const SamplePath& path) {
  TransportationProblem p;
  p.rows = path.size();
  p.cols = inst.num_locations();
  for (const auto& c : path.cases) p.weights.insert(p.weights.end(), c.scores.begin(), c.scores.end());
  for (std::size_t j = 0; j < p.cols; ++j) p.capacities.push_back(static_cast<double>(inst.capacity(j)));
  return p;
}

// Dual objective of the transportation LP for column prices mu:
// sum_t max_j (w_tj - mu_j) + sum_j mu_j c_j.
double transport_dual(const TransportationProblem& p, const std::vector<double>& mu) {
  double total = 0.0;
  for (std::size_t t = 0; t < p.rows; ++t) {
    double best = -kInfinity;
    for (std::size_t j = 0; j < p.cols; ++j) best = std::max(best, p.weight(t, j) - mu[j]);
    total += best;
  }
  for (std::size_t j = 0; j < p.cols; ++j) total += mu[j] * p.capacities[j];
  return total;
}

}  // namespace

TEST_CASE("simplex small programs") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_variable(1.0);
  lp.add_constraint({{0, 1.0}}, Relation::LessEqual, 1.0);
  lp.add_constraint({{1, 1.0}}, Relation::LessEqual, 2.0);
  const auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sol.duals[0] == doctest::Approx(1.0));
  CHECK(sol.duals[1] == doctest::Approx(1.0));

  LinearProgram bad;
  bad.sense = Sense::Minimize;
  bad.add_variable(1.0);
  bad.add_constraint({{0, 1.0}}, Relation::GreaterEqual, 2.0);
  bad.add_constraint({{0, 1.0}}, Relation::LessEqual, 1.0);
  CHECK(solve_lp(bad).status == LpStatus::Infeasible);

  LinearProgram unbounded;
  unbounded.add_variable(1.0);
  unbounded.add_variable(0.0);
  unbounded.add_constraint({{0, 1.0}, {1, -1.0}}, Relation::LessEqual, 1.0);
  CHECK(solve_lp(unbounded).status == LpStatus::Unbounded);
}

TEST_CASE("simplex handles free and bounded variables") {
  // min |x - 3| + |y + 2| via free x, y and epigraph variables.
  LinearProgram lp;
  lp.sense = Sense::Minimize;
  const auto x = lp.add_variable(0.0, -kInfinity, kInfinity);
  const auto y = lp.add_variable(0.0, -kInfinity, kInfinity);
  const auto a = lp.add_variable(1.0);
  const auto b = lp.add_variable(1.0);
  lp.add_constraint({{a, 1.0}, {x, -1.0}}, Relation::GreaterEqual, -3.0);
  lp.add_constraint({{a, 1.0}, {x, 1.0}}, Relation::GreaterEqual, 3.0);
  lp.add_constraint({{b, 1.0}, {y, -1.0}}, Relation::GreaterEqual, 2.0);
  lp.add_constraint({{b, 1.0}, {y, 1.0}}, Relation::GreaterEqual, -2.0);
  auto sol = solve_lp(lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.primal[x] == doctest::Approx(3.0));
  CHECK(sol.primal[y] == doctest::Approx(-2.0));

  // max x with x in [-5, -1]
  LinearProgram box;
  box.add_variable(1.0, -5.0, -1.0);
  sol = solve_lp(box);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(-1.0));

  // min x with x <= 4 only
  LinearProgram upper;
  upper.sense = Sense::Minimize;
  upper.add_variable(-1.0, -kInfinity, 4.0);
  sol = solve_lp(upper);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(-4.0));
}

TEST_CASE("simplex rejects malformed programs") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_constraint({{3, 1.0}}, Relation::LessEqual, 1.0);
  CHECK_THROWS_AS(solve_lp(lp), ShapeError);

  LinearProgram many;
  for (int k = 0; k < 6; ++k) many.add_variable(1.0 + k);
  for (int k = 0; k < 6; ++k) many.add_constraint({{static_cast<std::size_t>(k), 1.0}}, Relation::LessEqual, 1.0);
  SimplexOptions tight;
  tight.max_iterations = 1;
  CHECK_THROWS_AS(solve_lp(many, tight), SolverStall);
}

TEST_CASE("fig1 transportation") {
  const auto inst = testing::fig1_instance();
  const auto path = testing::fig1_path();
  const auto p = path_problem(inst, path);
  const auto ssp = solve_transportation(p);
  CHECK(ssp.value == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(check_fractional_feasibility(inst, ssp.assignment));
  const auto lp = solve_lp(transportation_lp(p, Objective::Maximize));
  REQUIRE(lp.status == LpStatus::Optimal);
  CHECK(lp.objective == doctest::Approx(50.0).epsilon(1e-9));
  // Closed form over the number x of A cases at loc1: 45 + 0.1 x.
  double best = -1.0;
  for (int x = 0; x <= 50; ++x) best = std::max(best, 45.0 + 0.1 * x);
  CHECK(ssp.value == doctest::Approx(best));
}

TEST_CASE("transportation examples") {
  TransportationProblem p;
  p.rows = 2;
  p.cols = 2;
  p.weights = {0.9, 0.7, 0.9, 0.7};
  p.capacities = {1, 1};
  CHECK(solve_transportation(p).value == doctest::Approx(1.6));

  TransportationProblem a;
  a.rows = 50;
  a.cols = 2;
  for (int t = 0; t < 50; ++t) {
    a.weights.push_back(0.9);
    a.weights.push_back(0.7);
  }
  a.capacities = {25, 25};
  CHECK(solve_transportation(a).value == doctest::Approx(40.0));
  CHECK(solve_transportation_simplex(a).value == doctest::Approx(40.0));

  TransportationProblem one_col;
  one_col.rows = 3;
  one_col.cols = 2;
  one_col.weights = {0.9, 0.1, 0.8, 0.2, 0.7, 0.3};
  one_col.capacities = {0, 3};
  CHECK(solve_transportation(one_col).value == doctest::Approx(0.6));

  one_col.capacities = {1, 1};
  CHECK_THROWS_AS(solve_transportation(one_col), InfeasibleError);
}

TEST_CASE("integral capacities give integral solutions") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    auto sp = testing::random_small_problem(rng, 30, 5, 1);
    const auto sol = solve_transportation(path_problem(sp.instance, sp.path));
    for (double v : sol.assignment.values()) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("transportation matches brute force and the simplex") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    auto sp = testing::random_small_problem(rng, 7, 3, 1, rep % 2 == 0);
    const auto p = path_problem(sp.instance, sp.path);
    const double brute = testing::brute_force_opt(sp.instance, sp.path);
    const auto ssp = solve_transportation(p);
    const auto simplex = solve_transportation_simplex(p);
    CHECK(ssp.value == doctest::Approx(brute).epsilon(1e-9));
    CHECK(simplex.value == doctest::Approx(brute).epsilon(1e-9));
    CHECK(check_fractional_feasibility(sp.instance, ssp.assignment));
    // Both price vectors certify optimality by strong duality.
    CHECK(transport_dual(p, ssp.column_prices) == doctest::Approx(brute).epsilon(1e-9));
    CHECK(transport_dual(p, simplex.column_prices) == doctest::Approx(brute).epsilon(1e-9));
    for (double mu : ssp.column_prices) CHECK(mu >= -1e-12);
  }
}

TEST_CASE("minimization route") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 50; ++rep) {
    auto sp = testing::random_small_problem(rng, 10, 4, 1);
    auto p = path_problem(sp.instance, sp.path);
    const double a = solve_transportation(p, Objective::Minimize).value;
    const double b = solve_transportation_simplex(p, Objective::Minimize).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    for (double& w : p.weights) w = -w;
    CHECK(solve_transportation(p).value == doctest::Approx(-a).epsilon(1e-9));
  }
}

TEST_CASE("fractional capacities fall back to the simplex") {
  TransportationProblem p;
  p.rows = 1;
  p.cols = 2;
  p.weights = {0.9, 0.7};
  p.capacities = {0.5, 0.5};
  const auto sol = solve_transportation(p);
  CHECK(sol.value == doctest::Approx(0.8));
  CHECK(sol.assignment(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("weak duality and scaling on random LPs") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    // max c.x s.t. A x <= b, x >= 0 with A, b, c > 0: always feasible and bounded.
    const int n = 2 + rep % 5;
    const int m = 1 + rep % 4;
    LinearProgram lp;
    for (int j = 0; j < n; ++j) lp.add_variable(u(rng));
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    std::vector<double> b(m);
    for (int i = 0; i < m; ++i) {
      std::vector<Term> terms;
      for (int j = 0; j < n; ++j) {
        a[i][j] = 0.1 + u(rng);
        terms.push_back({static_cast<std::size_t>(j), a[i][j]});
      }
      b[i] = 0.5 + u(rng);
      lp.add_constraint(terms, Relation::LessEqual, b[i]);
    }
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(max_violation(lp, sol.primal) <= 1e-7);

    // Dual feasibility: y >= 0 and A^T y >= c; dual objective b.y equals the primal.
    double dual_obj = 0.0;
    for (int i = 0; i < m; ++i) {
      CHECK(sol.duals[i] >= -1e-9);
      dual_obj += b[i] * sol.duals[i];
    }
    for (int j = 0; j < n; ++j) {
      double col = 0.0;
      for (int i = 0; i < m; ++i) col += a[i][j] * sol.duals[i];
      CHECK(col >= lp.objective[j] - 1e-7);
    }
    CHECK(dual_obj >= sol.objective - 1e-7);
    CHECK(dual_obj == doctest::Approx(sol.objective).epsilon(1e-7));

    // Scaling the objective scales the optimum.
    LinearProgram scaled = lp;
    for (double& c : scaled.objective) c *= 3.0;
    CHECK(solve_lp(scaled).objective == doctest::Approx(3.0 * sol.objective).epsilon(1e-9));
  }
}
