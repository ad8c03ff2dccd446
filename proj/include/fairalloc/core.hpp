#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fairalloc {

struct LocationSpec {
  std::string id;
  long capacity = 0;
};

// Static problem data: capacitated locations, horizon T and the group universe.
// Constructed through Instance::create, which enforces
//   - capacities >= 0 and sum_j s_j >= T,
//   - unique location and group identifiers.
class Instance {
 public:
  Instance() = default;

  static Instance create(std::vector<LocationSpec> locations, long horizon,
                         std::vector<std::string> groups);

  const std::vector<LocationSpec>& locations() const { return locations_; }
  const std::vector<std::string>& groups() const { return groups_; }
  long horizon() const { return horizon_; }

  std::size_t num_locations() const { return locations_.size(); }
  std::size_t num_groups() const { return groups_.size(); }

  long capacity(std::size_t j) const { return locations_[j].capacity; }
  std::vector<long> capacities() const;
  long total_capacity() const;

  // s_j / T
  double fractional_capacity(std::size_t j) const;
  double min_fractional_capacity() const;

  // Index of a group identifier, or -1.
  int group_index(const std::string& id) const;
  int location_index(const std::string& id) const;

 private:
  std::vector<LocationSpec> locations_;
  long horizon_ = 0;
  std::vector<std::string> groups_;
};

// One arriving individual: its group index into Instance::groups() and one
// score per location.
struct Case {
  int group = 0;
  std::vector<double> scores;
};

struct SamplePath {
  std::vector<Case> cases;

  std::size_t size() const { return cases.size(); }
};

// Throws DataError when the path length, group indices or scores disagree
// with the instance.
void validate_path(const Instance& instance, const SamplePath& path);
void validate_case(const Instance& instance, const Case& c);

// Dense T x M matrix of fractional assignments.
class FractionalAssignment {
 public:
  FractionalAssignment() = default;
  FractionalAssignment(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t t, std::size_t j) { return data_[t * cols_ + j]; }
  double operator()(std::size_t t, std::size_t j) const { return data_[t * cols_ + j]; }
  std::span<const double> row(std::size_t t) const {
    return {data_.data() + t * cols_, cols_};
  }
  const std::vector<double>& values() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct IntegralAssignment {
  static constexpr int kUnassigned = -1;

  std::vector<int> chosen;

  IntegralAssignment() = default;
  explicit IntegralAssignment(std::size_t horizon) : chosen(horizon, kUnassigned) {}

  bool complete() const;
  std::vector<long> usage(std::size_t num_locations) const;
};

constexpr double kFractionalTolerance = 1e-9;

// N(g,t) for every group, counting cases 1..t.
std::vector<long> group_counts(const SamplePath& path, std::size_t num_groups, long t);
// Indices (0-based) of A(g,t).
std::vector<std::size_t> group_members(const SamplePath& path, int group, long t);

// alpha_g: average realized score of group g, 0 for empty groups.
double group_average_score(const SamplePath& path, const IntegralAssignment& assignment,
                           int group);
std::vector<double> group_average_scores(const SamplePath& path,
                                         const IntegralAssignment& assignment,
                                         std::size_t num_groups);
double global_average_score(const SamplePath& path, const IntegralAssignment& assignment);

bool check_fractional_feasibility(const Instance& instance, const FractionalAssignment& z);
// Exact integral check: complete, in range, per-location usage <= s_j.
bool check_integral_feasibility(const Instance& instance, const IntegralAssignment& a);

double max_score(const Case& c);

}  // namespace fairalloc
