#include "fairalloc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fairalloc/errors.hpp"

namespace fairalloc {

Instance Instance::create(std::vector<LocationSpec> locations, long horizon,
                          std::vector<std::string> groups) {
  if (locations.empty()) throw DataError("instance needs at least one location");
  if (groups.empty()) throw DataError("instance needs at least one group");
  if (horizon <= 0) throw DataError("horizon must be positive");

  std::set<std::string> seen;
  long total = 0;
  for (const auto& loc : locations) {
    if (loc.capacity < 0) throw DataError("negative capacity at location '" + loc.id + "'");
    if (!seen.insert(loc.id).second) throw DataError("duplicate location id '" + loc.id + "'");
    total += loc.capacity;
  }
  if (total < horizon) {
    throw DataError("total capacity " + std::to_string(total) + " is below the horizon " +
                    std::to_string(horizon));
  }
  seen.clear();
  for (const auto& g : groups) {
    if (!seen.insert(g).second) throw DataError("duplicate group id '" + g + "'");
  }

  Instance out;
  out.locations_ = std::move(locations);
  out.horizon_ = horizon;
  out.groups_ = std::move(groups);
  return out;
}

std::vector<long> Instance::capacities() const {
  std::vector<long> caps;
  caps.reserve(locations_.size());
  for (const auto& loc : locations_) caps.push_back(loc.capacity);
  return caps;
}

long Instance::total_capacity() const {
  long total = 0;
  for (const auto& loc : locations_) total += loc.capacity;
  return total;
}

double Instance::fractional_capacity(std::size_t j) const {
  return static_cast<double>(locations_[j].capacity) / static_cast<double>(horizon_);
}

double Instance::min_fractional_capacity() const {
  double best = fractional_capacity(0);
  for (std::size_t j = 1; j < locations_.size(); ++j) best = std::min(best, fractional_capacity(j));
  return best;
}

int Instance::group_index(const std::string& id) const {
  auto it = std::find(groups_.begin(), groups_.end(), id);
  return it == groups_.end() ? -1 : static_cast<int>(it - groups_.begin());
}

int Instance::location_index(const std::string& id) const {
  for (std::size_t j = 0; j < locations_.size(); ++j) {
    if (locations_[j].id == id) return static_cast<int>(j);
  }
  return -1;
}

void validate_case(const Instance& instance, const Case& c) {
  if (c.group < 0 || static_cast<std::size_t>(c.group) >= instance.num_groups()) {
    throw DataError("case group index " + std::to_string(c.group) + " out of range");
  }
  if (c.scores.size() != instance.num_locations()) {
    throw DataError("case has " + std::to_string(c.scores.size()) + " scores, expected " +
                    std::to_string(instance.num_locations()));
  }
  for (double w : c.scores) {
    if (!(w >= 0.0 && w <= 1.0)) throw DataError("score outside [0,1]");
  }
}

void validate_path(const Instance& instance, const SamplePath& path) {
  if (static_cast<long>(path.size()) != instance.horizon()) {
    throw DataError("path length " + std::to_string(path.size()) + " differs from horizon " +
                    std::to_string(instance.horizon()));
  }
  for (const auto& c : path.cases) validate_case(instance, c);
}

bool IntegralAssignment::complete() const {
  return std::none_of(chosen.begin(), chosen.end(), [](int j) { return j == kUnassigned; });
}

std::vector<long> IntegralAssignment::usage(std::size_t num_locations) const {
  std::vector<long> used(num_locations, 0);
  for (int j : chosen) {
    if (j >= 0 && static_cast<std::size_t>(j) < num_locations) ++used[j];
  }
  return used;
}

std::vector<long> group_counts(const SamplePath& path, std::size_t num_groups, long t) {
  if (t < 0 || t > static_cast<long>(path.size())) {
    throw RangeError("prefix length " + std::to_string(t) + " outside [0, " +
                     std::to_string(path.size()) + "]");
  }
  std::vector<long> counts(num_groups, 0);
  for (long i = 0; i < t; ++i) {
    const int g = path.cases[i].group;
    if (g >= 0 && static_cast<std::size_t>(g) < num_groups) ++counts[g];
  }
  return counts;
}

std::vector<std::size_t> group_members(const SamplePath& path, int group, long t) {
  if (t < 0 || t > static_cast<long>(path.size())) {
    throw RangeError("prefix length outside path");
  }
  std::vector<std::size_t> members;
  for (long i = 0; i < t; ++i) {
    if (path.cases[i].group == group) members.push_back(static_cast<std::size_t>(i));
  }
  return members;
}

double group_average_score(const SamplePath& path, const IntegralAssignment& assignment,
                           int group) {
  double total = 0.0;
  long count = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path.cases[t].group != group) continue;
    ++count;
    const int j = assignment.chosen[t];
    if (j != IntegralAssignment::kUnassigned) total += path.cases[t].scores[j];
  }
  return total / static_cast<double>(std::max(count, 1L));
}

std::vector<double> group_average_scores(const SamplePath& path,
                                         const IntegralAssignment& assignment,
                                         std::size_t num_groups) {
  std::vector<double> totals(num_groups, 0.0);
  std::vector<long> counts(num_groups, 0);
  for (std::size_t t = 0; t < path.size(); ++t) {
    const int g = path.cases[t].group;
    ++counts[g];
    const int j = assignment.chosen[t];
    if (j != IntegralAssignment::kUnassigned) totals[g] += path.cases[t].scores[j];
  }
  for (std::size_t g = 0; g < num_groups; ++g) {
    totals[g] /= static_cast<double>(std::max(counts[g], 1L));
  }
  return totals;
}

double global_average_score(const SamplePath& path, const IntegralAssignment& assignment) {
  double total = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const int j = assignment.chosen[t];
    if (j != IntegralAssignment::kUnassigned) total += path.cases[t].scores[j];
  }
  return path.size() == 0 ? 0.0 : total / static_cast<double>(path.size());
}

bool check_fractional_feasibility(const Instance& instance, const FractionalAssignment& z) {
  const std::size_t m = instance.num_locations();
  if (z.rows() != static_cast<std::size_t>(instance.horizon()) || z.cols() != m) {
    throw ShapeError("assignment matrix is " + std::to_string(z.rows()) + "x" +
                     std::to_string(z.cols()) + ", instance expects " +
                     std::to_string(instance.horizon()) + "x" + std::to_string(m));
  }
  std::vector<double> column(m, 0.0);
  for (std::size_t t = 0; t < z.rows(); ++t) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = z(t, j);
      if (v < -kFractionalTolerance || v > 1.0 + kFractionalTolerance) return false;
      row_sum += v;
      column[j] += v;
    }
    if (std::abs(row_sum - 1.0) > kFractionalTolerance) return false;
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (column[j] > static_cast<double>(instance.capacity(j)) + kFractionalTolerance) return false;
  }
  return true;
}

bool check_integral_feasibility(const Instance& instance, const IntegralAssignment& a) {
  if (a.chosen.size() != static_cast<std::size_t>(instance.horizon())) return false;
  std::vector<long> used(instance.num_locations(), 0);
  for (int j : a.chosen) {
    if (j < 0 || static_cast<std::size_t>(j) >= instance.num_locations()) return false;
    if (++used[j] > instance.capacity(j)) return false;
  }
  return true;
}

double max_score(const Case& c) { return *std::max_element(c.scores.begin(), c.scores.end()); }

}  // namespace fairalloc
