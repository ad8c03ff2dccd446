// Shared fixtures and brute-force oracles for the test suites. Nothing here
// calls into the solvers it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "fairalloc/core.hpp"

namespace testing {

using fairalloc::Case;
using fairalloc::Instance;
using fairalloc::SamplePath;

// Two groups of 50, two locations of 50. A scores (0.9, 0.7), B (0.2, 0.1).
inline Instance fig1_instance() {
  return Instance::create({{"loc1", 50}, {"loc2", 50}}, 100, {"A", "B"});
}

inline SamplePath fig1_path() {
  SamplePath path;
  for (int i = 0; i < 50; ++i) path.cases.push_back(Case{0, {0.9, 0.7}});
  for (int i = 0; i < 50; ++i) path.cases.push_back(Case{1, {0.2, 0.1}});
  return path;
}

struct SmallProblem {
  Instance instance;
  SamplePath path;
};

// Random small instance with integer capacities summing to at least T.
inline SmallProblem random_small_problem(std::mt19937_64& rng, int max_t = 8, int max_m = 3,
                                         int max_g = 3, bool coarse_scores = false) {
  std::uniform_int_distribution<int> t_dist(1, max_t);
  std::uniform_int_distribution<int> m_dist(1, max_m);
  std::uniform_int_distribution<int> g_dist(1, max_g);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int t = t_dist(rng);
  const int m = m_dist(rng);
  const int g = g_dist(rng);

  std::vector<long> caps(m, 0);
  // Spread T units plus some slack over the locations.
  std::uniform_int_distribution<int> slack_dist(0, 3);
  const int total = t + slack_dist(rng);
  std::uniform_int_distribution<int> pick(0, m - 1);
  for (int k = 0; k < total; ++k) ++caps[pick(rng)];

  std::vector<fairalloc::LocationSpec> locs;
  for (int j = 0; j < m; ++j) locs.push_back({"l" + std::to_string(j), caps[j]});
  std::vector<std::string> groups;
  for (int k = 0; k < g; ++k) groups.push_back("g" + std::to_string(k));

  SmallProblem out{Instance::create(locs, t, groups), {}};
  std::uniform_int_distribution<int> group_dist(0, g - 1);
  for (int i = 0; i < t; ++i) {
    Case c{group_dist(rng), {}};
    for (int j = 0; j < m; ++j) {
      double w = u(rng);
      if (coarse_scores) w = std::round(w * 4.0) / 4.0;
      c.scores.push_back(w);
    }
    out.path.cases.push_back(std::move(c));
  }
  return out;
}

// Calls visit(choice) for every integral assignment respecting capacities.
inline void enumerate_assignments(const Instance& instance, const SamplePath& path,
                                  const std::function<void(const std::vector<int>&)>& visit) {
  const std::size_t t_max = path.size();
  const std::size_t m = instance.num_locations();
  std::vector<int> choice(t_max, 0);
  std::vector<long> used(m, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t t) {
    if (t == t_max) {
      visit(choice);
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j] >= instance.capacity(j)) continue;
      ++used[j];
      choice[t] = static_cast<int>(j);
      rec(t + 1);
      --used[j];
    }
  };
  rec(0);
}

inline double brute_force_opt(const Instance& instance, const SamplePath& path) {
  double best = -1.0;
  enumerate_assignments(instance, path, [&](const std::vector<int>& choice) {
    double total = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) total += path.cases[t].scores[choice[t]];
    best = std::max(best, total);
  });
  return best;
}

// Per-group averages of an integral choice, 0 for empty groups.
inline std::vector<double> group_averages(const Instance& instance, const SamplePath& path,
                                          const std::vector<int>& choice) {
  std::vector<double> sum(instance.num_groups(), 0.0);
  std::vector<int> count(instance.num_groups(), 0);
  for (std::size_t t = 0; t < path.size(); ++t) {
    sum[path.cases[t].group] += path.cases[t].scores[choice[t]];
    ++count[path.cases[t].group];
  }
  for (std::size_t g = 0; g < sum.size(); ++g) sum[g] /= std::max(count[g], 1);
  return sum;
}

inline double brute_force_maxmin(const Instance& instance, const SamplePath& path) {
  std::vector<int> count(instance.num_groups(), 0);
  for (const auto& c : path.cases) ++count[c.group];
  double best = -1.0;
  enumerate_assignments(instance, path, [&](const std::vector<int>& choice) {
    const auto avg = group_averages(instance, path, choice);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < avg.size(); ++g) {
      if (count[g] > 0) worst = std::min(worst, avg[g]);
    }
    best = std::max(best, worst);
  });
  return best;
}

// Best integral total (per case) meeting the per-group requirements, or -1.
inline double brute_force_fair(const Instance& instance, const SamplePath& path,
                               const std::vector<double>& requirement) {
  double best = -1.0;
  enumerate_assignments(instance, path, [&](const std::vector<int>& choice) {
    const auto avg = group_averages(instance, path, choice);
    for (std::size_t g = 0; g < avg.size(); ++g) {
      if (avg[g] < requirement[g] - 1e-12) return;
    }
    double total = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) total += path.cases[t].scores[choice[t]];
    best = std::max(best, total / static_cast<double>(path.size()));
  });
  return best;
}

}  // namespace testing
