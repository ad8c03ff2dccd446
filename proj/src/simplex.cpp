#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "fairalloc/errors.hpp"
#include "fairalloc/lp.hpp"

namespace fairalloc::lp {

std::size_t LinearProgram::add_variable(double cost, double lo, double hi) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  return objective.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::vector<Term> terms, Relation relation, double rhs) {
  constraints.push_back(Constraint{std::move(terms), relation, rhs});
  return constraints.size() - 1;
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

double max_violation(const LinearProgram& program, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < program.num_variables(); ++i) {
    worst = std::max(worst, program.lower[i] - x[i]);
    worst = std::max(worst, x[i] - program.upper[i]);
  }
  for (const auto& row : program.constraints) {
    double lhs = 0.0;
    for (const auto& term : row.terms) lhs += term.coef * x[term.var];
    switch (row.relation) {
      case Relation::LessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case Relation::GreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case Relation::Equal: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  return worst;
}

namespace {

using SparseColumn = std::vector<std::pair<std::size_t, double>>;

// min c'x, Ax = b, x >= 0, b >= 0, with a starting basis of slacks and
// artificials.
struct StandardForm {
  enum class MapKind { Shift, Mirror, Split };
  struct VarMap {
    MapKind kind;
    std::size_t col;
    std::size_t col2;
    double offset;
  };

  std::size_t rows = 0;
  std::vector<SparseColumn> columns;
  std::vector<double> cost;
  std::vector<double> rhs;
  std::vector<char> artificial;
  std::vector<std::size_t> initial_basis;
  std::vector<VarMap> var_map;
  std::vector<double> row_sign;
  double cost_sign = 1.0;

  std::size_t add_column(double c) {
    columns.emplace_back();
    cost.push_back(c);
    artificial.push_back(0);
    return columns.size() - 1;
  }
};

StandardForm to_standard_form(const LinearProgram& program) {
  StandardForm sf;
  const std::size_t n = program.num_variables();
  sf.cost_sign = program.sense == Sense::Minimize ? 1.0 : -1.0;

  struct RowBuild {
    std::vector<std::pair<std::size_t, double>> terms;
    Relation relation;
    double rhs;
  };
  std::vector<RowBuild> rows;
  rows.reserve(program.num_constraints() + n);

  sf.var_map.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = program.lower[i];
    const double hi = program.upper[i];
    const double c = sf.cost_sign * program.objective[i];
    if (std::isfinite(lo)) {
      const std::size_t col = sf.add_column(c);
      sf.var_map[i] = {StandardForm::MapKind::Shift, col, col, lo};
    } else if (std::isfinite(hi)) {
      const std::size_t col = sf.add_column(-c);
      sf.var_map[i] = {StandardForm::MapKind::Mirror, col, col, hi};
    } else {
      const std::size_t plus = sf.add_column(c);
      const std::size_t minus = sf.add_column(-c);
      sf.var_map[i] = {StandardForm::MapKind::Split, plus, minus, 0.0};
    }
  }

  auto translate = [&](const std::vector<Term>& terms, double rhs) {
    RowBuild row{{}, Relation::Equal, rhs};
    for (const auto& term : terms) {
      if (term.var >= n) throw ShapeError("constraint references variable " +
                                          std::to_string(term.var) + " of " + std::to_string(n));
      if (!std::isfinite(term.coef)) throw ShapeError("non-finite constraint coefficient");
      const auto& map = sf.var_map[term.var];
      switch (map.kind) {
        case StandardForm::MapKind::Shift:
          row.terms.emplace_back(map.col, term.coef);
          row.rhs -= term.coef * map.offset;
          break;
        case StandardForm::MapKind::Mirror:
          row.terms.emplace_back(map.col, -term.coef);
          row.rhs -= term.coef * map.offset;
          break;
        case StandardForm::MapKind::Split:
          row.terms.emplace_back(map.col, term.coef);
          row.terms.emplace_back(map.col2, -term.coef);
          break;
      }
    }
    return row;
  };

  for (const auto& con : program.constraints) {
    if (!std::isfinite(con.rhs)) throw ShapeError("constraint right-hand side must be finite");
    RowBuild row = translate(con.terms, con.rhs);
    row.relation = con.relation;
    rows.push_back(std::move(row));
  }
  const std::size_t original_rows = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = program.lower[i];
    const double hi = program.upper[i];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      RowBuild row{{{sf.var_map[i].col, 1.0}}, Relation::LessEqual, hi - lo};
      rows.push_back(std::move(row));
    }
  }

  sf.rows = rows.size();
  sf.rhs.resize(sf.rows);
  sf.row_sign.assign(sf.rows, 1.0);
  sf.initial_basis.resize(sf.rows);
  for (std::size_t r = 0; r < sf.rows; ++r) {
    auto& row = rows[r];
    const double sign = row.rhs < 0.0 ? -1.0 : 1.0;
    sf.row_sign[r] = sign;
    sf.rhs[r] = sign * row.rhs;

    // Merge duplicate entries so each column sees one coefficient per row.
    std::sort(row.terms.begin(), row.terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < row.terms.size();) {
      std::size_t col = row.terms[k].first;
      double value = 0.0;
      while (k < row.terms.size() && row.terms[k].first == col) value += row.terms[k++].second;
      if (value != 0.0) sf.columns[col].emplace_back(r, sign * value);
    }

    bool has_unit_slack = false;
    if (row.relation != Relation::Equal) {
      const double slack_coef = (row.relation == Relation::LessEqual ? 1.0 : -1.0) * sign;
      const std::size_t slack = sf.add_column(0.0);
      sf.columns[slack].emplace_back(r, slack_coef);
      if (slack_coef > 0.0) {
        sf.initial_basis[r] = slack;
        has_unit_slack = true;
      }
    }
    if (!has_unit_slack) {
      const std::size_t art = sf.add_column(0.0);
      sf.artificial[art] = 1;
      sf.columns[art].emplace_back(r, 1.0);
      sf.initial_basis[r] = art;
    }
  }
  sf.row_sign.resize(original_rows);
  return sf;
}

enum class PhaseResult { Optimal, Unbounded };

class RevisedSimplex {
 public:
  RevisedSimplex(const StandardForm& sf, const SimplexOptions& options)
      : sf_(sf), options_(options), m_(sf.rows), n_(sf.columns.size()) {
    basis_ = sf.initial_basis;
    is_basic_.assign(n_, 0);
    for (std::size_t c : basis_) is_basic_[c] = 1;
    b_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) b_[static_cast<Eigen::Index>(r)] = sf.rhs[r];
    cap_ = options.max_iterations != 0 ? options.max_iterations
                                       : 10 * (m_ + n_) * (m_ + n_);
    refactor();
  }

  PhaseResult run(const std::vector<double>& cost, bool artificials_may_enter) {
    bool bland = false;
    std::size_t degenerate_streak = 0;
    Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(m_));
    while (true) {
      if (iterations_ >= cap_) {
        throw SolverStall("simplex exceeded " + std::to_string(cap_) + " iterations");
      }
      if (since_refactor_ >= options_.refactor_interval) refactor();

      for (std::size_t r = 0; r < m_; ++r) cb[static_cast<Eigen::Index>(r)] = cost[basis_[r]];
      const Eigen::RowVectorXd y = cb.transpose() * binv_;

      std::size_t entering = n_;
      double best = -options_.optimality_tolerance;
      for (std::size_t j = 0; j < n_; ++j) {
        if (is_basic_[j]) continue;
        if (sf_.artificial[j] && !artificials_may_enter) continue;
        double d = cost[j];
        for (const auto& [row, value] : sf_.columns[j]) d -= y[static_cast<Eigen::Index>(row)] * value;
        if (bland) {
          if (d < -options_.optimality_tolerance) {
            entering = j;
            break;
          }
        } else if (d < best) {
          best = d;
          entering = j;
        }
      }
      if (entering == n_) return PhaseResult::Optimal;

      column_times_binv(entering, alpha);

      std::size_t leaving = m_;
      double min_ratio = kInfinity;
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = alpha[static_cast<Eigen::Index>(r)];
        double ratio;
        if (a > options_.pivot_tolerance) {
          ratio = std::max(xb_[static_cast<Eigen::Index>(r)], 0.0) / a;
        } else if (!artificials_may_enter && sf_.artificial[basis_[r]] &&
                   std::abs(a) > options_.pivot_tolerance) {
          // A zero artificial left in the basis: pivot it out before it can move.
          ratio = 0.0;
        } else {
          continue;
        }
        // Ties go to the lowest column index.
        if (leaving == m_ || ratio < min_ratio - 1e-12) {
          min_ratio = ratio;
          leaving = r;
        } else if (ratio <= min_ratio + 1e-12 && basis_[r] < basis_[leaving]) {
          min_ratio = std::min(min_ratio, ratio);
          leaving = r;
        }
      }
      if (leaving == m_) return PhaseResult::Unbounded;

      if (min_ratio <= 1e-12) {
        if (++degenerate_streak > options_.degenerate_streak_limit) bland = true;
      } else {
        degenerate_streak = 0;
      }
      pivot(entering, leaving, alpha);
    }
  }

  // After phase one, swap zero-valued artificials out of the basis wherever a
  // structural column can take their place.
  void drive_out_artificials() {
    Eigen::RowVectorXd row_r;
    for (std::size_t r = 0; r < m_; ++r) {
      if (!sf_.artificial[basis_[r]]) continue;
      row_r = binv_.row(static_cast<Eigen::Index>(r));
      for (std::size_t j = 0; j < n_; ++j) {
        if (is_basic_[j] || sf_.artificial[j]) continue;
        double a = 0.0;
        for (const auto& [row, value] : sf_.columns[j]) a += row_r[static_cast<Eigen::Index>(row)] * value;
        if (std::abs(a) > 1e-9) {
          Eigen::VectorXd alpha(static_cast<Eigen::Index>(m_));
          column_times_binv(j, alpha);
          pivot(j, r, alpha);
          break;
        }
      }
    }
  }

  double objective(const std::vector<double>& cost) const {
    double total = 0.0;
    for (std::size_t r = 0; r < m_; ++r) total += cost[basis_[r]] * xb_[static_cast<Eigen::Index>(r)];
    return total;
  }

  std::vector<double> values() const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) x[basis_[r]] = std::max(0.0, xb_[static_cast<Eigen::Index>(r)]);
    return x;
  }

  std::vector<double> row_duals(const std::vector<double>& cost) const {
    Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) cb[static_cast<Eigen::Index>(r)] = cost[basis_[r]];
    const Eigen::RowVectorXd y = cb.transpose() * binv_;
    return std::vector<double>(y.data(), y.data() + y.size());
  }

  void refactor() {
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd basis_matrix = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t r = 0; r < m_; ++r) {
      for (const auto& [row, value] : sf_.columns[basis_[r]]) {
        basis_matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(r)) = value;
      }
    }
    binv_ = basis_matrix.partialPivLu().inverse();
    xb_ = binv_ * b_;
    since_refactor_ = 0;
  }

  std::size_t iterations() const { return iterations_; }

 private:
  void column_times_binv(std::size_t j, Eigen::VectorXd& out) const {
    out.setZero();
    for (const auto& [row, value] : sf_.columns[j]) out += binv_.col(static_cast<Eigen::Index>(row)) * value;
  }

  void pivot(std::size_t entering, std::size_t leaving, const Eigen::VectorXd& alpha) {
    const auto r = static_cast<Eigen::Index>(leaving);
    const double pivot_value = alpha[r];
    const double theta = xb_[r] / pivot_value;
    xb_ -= theta * alpha;
    xb_[r] = theta;
    const Eigen::RowVectorXd pivot_row = binv_.row(r) / pivot_value;
    binv_.noalias() -= alpha * pivot_row;
    binv_.row(r) = pivot_row;

    is_basic_[basis_[leaving]] = 0;
    basis_[leaving] = entering;
    is_basic_[entering] = 1;
    ++iterations_;
    ++since_refactor_;
  }

  const StandardForm& sf_;
  const SimplexOptions& options_;
  std::size_t m_;
  std::size_t n_;
  std::vector<std::size_t> basis_;
  std::vector<char> is_basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd b_;
  Eigen::VectorXd xb_;
  std::size_t iterations_ = 0;
  std::size_t since_refactor_ = 0;
  std::size_t cap_ = 0;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& program, const SimplexOptions& options) {
  const std::size_t n = program.num_variables();
  if (program.lower.size() != n || program.upper.size() != n) {
    throw ShapeError("variable bounds do not match the objective length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(program.objective[i])) throw ShapeError("non-finite objective coefficient");
  }

  LpSolution solution;
  for (std::size_t i = 0; i < n; ++i) {
    if (program.lower[i] > program.upper[i]) {
      solution.status = LpStatus::Infeasible;
      return solution;
    }
  }

  const StandardForm sf = to_standard_form(program);
  RevisedSimplex simplex(sf, options);

  std::vector<double> phase_one_cost(sf.columns.size(), 0.0);
  bool any_artificial = false;
  for (std::size_t j = 0; j < sf.columns.size(); ++j) {
    if (sf.artificial[j]) {
      phase_one_cost[j] = 1.0;
      any_artificial = true;
    }
  }
  if (any_artificial) {
    simplex.run(phase_one_cost, true);
    simplex.refactor();
    double scale = 1.0;
    for (double v : sf.rhs) scale = std::max(scale, std::abs(v));
    if (simplex.objective(phase_one_cost) > 1e-8 * scale) {
      solution.status = LpStatus::Infeasible;
      solution.iterations = simplex.iterations();
      return solution;
    }
    simplex.drive_out_artificials();
  }

  const PhaseResult result = simplex.run(sf.cost, false);
  solution.iterations = simplex.iterations();
  if (result == PhaseResult::Unbounded) {
    solution.status = LpStatus::Unbounded;
    return solution;
  }
  simplex.refactor();

  const std::vector<double> values = simplex.values();
  solution.primal.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& map = sf.var_map[i];
    switch (map.kind) {
      case StandardForm::MapKind::Shift: solution.primal[i] = map.offset + values[map.col]; break;
      case StandardForm::MapKind::Mirror: solution.primal[i] = map.offset - values[map.col]; break;
      case StandardForm::MapKind::Split:
        solution.primal[i] = values[map.col] - values[map.col2];
        break;
    }
  }
  solution.objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) solution.objective += program.objective[i] * solution.primal[i];

  const std::vector<double> y = simplex.row_duals(sf.cost);
  solution.duals.resize(program.num_constraints());
  for (std::size_t r = 0; r < program.num_constraints(); ++r) {
    solution.duals[r] = sf.cost_sign * sf.row_sign[r] * y[r];
  }
  solution.status = LpStatus::Optimal;
  return solution;
}

}  // namespace fairalloc::lp
