#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <utility>

#include "fairalloc/errors.hpp"
#include "fairalloc/lp.hpp"

namespace fairalloc::lp {

namespace {

void validate(const TransportationProblem& p) {
  if (p.cols == 0) throw ShapeError("transportation problem needs at least one column");
  if (p.weights.size() != p.rows * p.cols) {
    throw ShapeError("weight matrix has " + std::to_string(p.weights.size()) + " entries, expected " +
                     std::to_string(p.rows * p.cols));
  }
  if (p.capacities.size() != p.cols) throw ShapeError("capacity vector length differs from columns");
  double total = 0.0;
  for (double c : p.capacities) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ShapeError("capacities must be finite and >= 0");
    total += c;
  }
  for (double w : p.weights) {
    if (!std::isfinite(w)) throw ShapeError("non-finite transportation weight");
  }
  if (total + 1e-9 < static_cast<double>(p.rows)) {
    throw InfeasibleError("column capacities " + std::to_string(total) + " cannot absorb " +
                          std::to_string(p.rows) + " rows");
  }
}

bool integral_capacities(const TransportationProblem& p) {
  return std::all_of(p.capacities.begin(), p.capacities.end(),
                     [](double c) { return std::abs(c - std::round(c)) <= 1e-9; });
}

// Successive shortest paths specialised to unit-demand rows. Residual paths
// only ever pass through columns, so each augmentation is a longest-gain path
// on an M-node graph whose arc i->j carries the best gain of moving one row
// currently at i over to j. Those arc weights come from lazily pruned heaps.
class ColumnFlow {
 public:
  ColumnFlow(const TransportationProblem& p, double sign)
      : p_(p), sign_(sign), m_(p.cols), location_(p.rows, -1), heaps_(p.cols * p.cols) {
    remaining_.reserve(m_);
    for (double c : p.capacities) remaining_.push_back(std::lround(c));
  }

  void assign_all() {
    std::vector<double> best(m_);
    std::vector<int> pred(m_);
    std::vector<double> arc(m_ * m_);
    for (std::size_t t = 0; t < p_.rows; ++t) {
      refresh_arcs(arc);
      for (std::size_t j = 0; j < m_; ++j) {
        best[j] = gain(t, j);
        pred[j] = -1;
      }
      for (std::size_t pass = 0; pass < m_; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < m_; ++i) {
          for (std::size_t j = 0; j < m_; ++j) {
            const double a = arc[i * m_ + j];
            if (i == j || a == -kInfinity) continue;
            if (best[i] + a > best[j] + 1e-12) {
              best[j] = best[i] + a;
              pred[j] = static_cast<int>(i);
              changed = true;
            }
          }
        }
        if (!changed) break;
      }

      int end = -1;
      for (std::size_t j = 0; j < m_; ++j) {
        if (remaining_[j] <= 0) continue;
        if (end < 0 || best[j] > best[static_cast<std::size_t>(end)]) end = static_cast<int>(j);
      }
      if (end < 0) throw InfeasibleError("no column with remaining capacity");

      // Walk the path backwards, shifting one row along each arc.
      --remaining_[static_cast<std::size_t>(end)];
      std::size_t cur = static_cast<std::size_t>(end);
      std::size_t steps = 0;
      while (pred[cur] != -1) {
        if (++steps > m_) throw SolverError("cycle in transportation augmenting path");
        const auto from = static_cast<std::size_t>(pred[cur]);
        const std::size_t row = top_row(from, cur);
        place(row, cur);
        cur = from;
      }
      place(t, cur);
    }
  }

  // Componentwise-smallest prices mu >= 0 with mu_j >= mu_i + arc(i, j).
  std::vector<double> minimal_prices() {
    std::vector<double> arc(m_ * m_);
    refresh_arcs(arc);
    std::vector<double> mu(m_, 0.0);
    for (std::size_t pass = 0; pass <= m_; ++pass) {
      bool changed = false;
      for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t j = 0; j < m_; ++j) {
          const double a = arc[i * m_ + j];
          if (i == j || a == -kInfinity) continue;
          if (mu[i] + a > mu[j] + 1e-12) {
            mu[j] = mu[i] + a;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    return mu;
  }

  int location(std::size_t t) const { return location_[t]; }

 private:
  using Entry = std::pair<double, long>;  // (gain of the move, -row): ties favour low rows

  double gain(std::size_t t, std::size_t j) const { return sign_ * p_.weight(t, j); }

  std::priority_queue<Entry>& heap(std::size_t from, std::size_t to) { return heaps_[from * m_ + to]; }

  void prune(std::size_t from, std::size_t to) {
    auto& h = heap(from, to);
    while (!h.empty() && location_[static_cast<std::size_t>(-h.top().second)] != static_cast<int>(from)) {
      h.pop();
    }
  }

  void refresh_arcs(std::vector<double>& arc) {
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if (i == j) {
          arc[i * m_ + j] = -kInfinity;
          continue;
        }
        prune(i, j);
        const auto& h = heap(i, j);
        arc[i * m_ + j] = h.empty() ? -kInfinity : h.top().first;
      }
    }
  }

  std::size_t top_row(std::size_t from, std::size_t to) {
    prune(from, to);
    return static_cast<std::size_t>(-heap(from, to).top().second);
  }

  void place(std::size_t row, std::size_t column) {
    location_[row] = static_cast<int>(column);
    for (std::size_t k = 0; k < m_; ++k) {
      if (k == column) continue;
      heap(column, k).emplace(gain(row, k) - gain(row, column), -static_cast<long>(row));
    }
  }

  const TransportationProblem& p_;
  double sign_;
  std::size_t m_;
  std::vector<long> remaining_;
  std::vector<int> location_;
  std::vector<std::priority_queue<Entry>> heaps_;
};

}  // namespace

LinearProgram transportation_lp(const TransportationProblem& p, Objective objective) {
  LinearProgram program;
  program.sense = objective == Objective::Maximize ? Sense::Maximize : Sense::Minimize;
  for (std::size_t t = 0; t < p.rows; ++t) {
    for (std::size_t j = 0; j < p.cols; ++j) program.add_variable(p.weight(t, j));
  }
  for (std::size_t t = 0; t < p.rows; ++t) {
    std::vector<Term> terms;
    for (std::size_t j = 0; j < p.cols; ++j) terms.push_back({t * p.cols + j, 1.0});
    program.add_constraint(std::move(terms), Relation::Equal, 1.0);
  }
  for (std::size_t j = 0; j < p.cols; ++j) {
    std::vector<Term> terms;
    for (std::size_t t = 0; t < p.rows; ++t) terms.push_back({t * p.cols + j, 1.0});
    program.add_constraint(std::move(terms), Relation::LessEqual, p.capacities[j]);
  }
  return program;
}

TransportationSolution solve_transportation_simplex(const TransportationProblem& p,
                                                    Objective objective) {
  validate(p);
  const LinearProgram program = transportation_lp(p, objective);
  const LpSolution lp = solve_lp(program);
  if (lp.status != LpStatus::Optimal) {
    throw InfeasibleError(std::string("transportation LP is ") + to_string(lp.status));
  }
  TransportationSolution out;
  out.value = lp.objective;
  out.assignment = FractionalAssignment(p.rows, p.cols);
  for (std::size_t t = 0; t < p.rows; ++t) {
    for (std::size_t j = 0; j < p.cols; ++j) out.assignment(t, j) = lp.primal[t * p.cols + j];
  }
  out.column_prices.assign(lp.duals.begin() + static_cast<std::ptrdiff_t>(p.rows), lp.duals.end());
  return out;
}

TransportationSolution solve_transportation(const TransportationProblem& p, Objective objective) {
  validate(p);
  if (!integral_capacities(p)) return solve_transportation_simplex(p, objective);

  const double sign = objective == Objective::Maximize ? 1.0 : -1.0;
  ColumnFlow flow(p, sign);
  flow.assign_all();

  TransportationSolution out;
  out.assignment = FractionalAssignment(p.rows, p.cols);
  for (std::size_t t = 0; t < p.rows; ++t) {
    const auto j = static_cast<std::size_t>(flow.location(t));
    out.assignment(t, j) = 1.0;
    out.value += p.weight(t, j);
  }
  out.column_prices = flow.minimal_prices();
  if (objective == Objective::Minimize) {
    for (double& mu : out.column_prices) mu = -mu;
  }
  return out;
}

}  // namespace fairalloc::lp
