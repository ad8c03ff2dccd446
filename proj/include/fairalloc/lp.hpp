#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "fairalloc/core.hpp"

namespace fairalloc::lp {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { Maximize, Minimize };
enum class Relation { LessEqual, Equal, GreaterEqual };

struct Term {
  std::size_t var;
  double coef;
};

struct Constraint {
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

// A linear program over bounded variables. Variables default to [0, +inf).
struct LinearProgram {
  Sense sense = Sense::Maximize;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Constraint> constraints;

  std::size_t add_variable(double cost, double lo = 0.0, double hi = kInfinity);
  std::size_t add_constraint(std::vector<Term> terms, Relation relation, double rhs);
  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_constraints() const { return constraints.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> primal;
  // Shadow price of each constraint, d(objective)/d(rhs), filled when Optimal.
  std::vector<double> duals;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  // 0 selects the default cap of 10 * (rows + cols)^2 on the standard form.
  std::size_t max_iterations = 0;
  double pivot_tolerance = 1e-10;
  double optimality_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  std::size_t refactor_interval = 64;
  // Consecutive degenerate pivots tolerated under Dantzig pricing before the
  // solver switches to Bland's rule for the rest of the phase.
  std::size_t degenerate_streak_limit = 50;
};

// Dense revised simplex, two phases. Throws ShapeError on malformed input and
// SolverStall when the iteration cap is hit.
LpSolution solve_lp(const LinearProgram& program, const SimplexOptions& options = {});

// Largest constraint or bound violation of x, used by tests and post-checks.
double max_violation(const LinearProgram& program, const std::vector<double>& x);

// ---------------------------------------------------------------------------
// Transportation problems: n rows with unit demand, M columns with capacity.

struct TransportationProblem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;     // row-major rows x cols
  std::vector<double> capacities;  // one per column, may be fractional

  double weight(std::size_t t, std::size_t j) const { return weights[t * cols + j]; }
};

struct TransportationSolution {
  double value = 0.0;
  FractionalAssignment assignment;
  // Column prices (capacity shadow prices for the maximization, >= 0).
  std::vector<double> column_prices;
};

enum class Objective { Maximize, Minimize };

// Exact optimum of sum_{t,j} w_tj z_tj over rows summing to one and column
// sums <= capacity. Integral capacities use successive shortest paths, which
// returns an integral assignment and the componentwise-smallest column
// prices; fractional capacities fall back to the simplex.
// Throws InfeasibleError when the capacities cannot absorb every row.
TransportationSolution solve_transportation(const TransportationProblem& problem,
                                            Objective objective = Objective::Maximize);

// Same problem through the generic simplex; kept as an independent route.
TransportationSolution solve_transportation_simplex(const TransportationProblem& problem,
                                                    Objective objective = Objective::Maximize);

LinearProgram transportation_lp(const TransportationProblem& problem, Objective objective);

}  // namespace fairalloc::lp
