#include "fairalloc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairalloc/errors.hpp"
#include "parallel.hpp"

namespace fairalloc {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view name) {
  std::uint64_t s = splitmix(master);
  s = splitmix(s ^ index);
  return splitmix(s ^ hash_name(name));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below needs n >= 1");
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

ArrivalDistribution ArrivalDistribution::empirical(std::vector<Case> pool, std::size_t num_groups) {
  if (pool.empty()) throw ArgumentError("empirical distribution needs a non-empty pool");
  if (num_groups == 0) throw ArgumentError("empirical distribution needs at least one group");
  ArrivalDistribution d;
  d.num_locations_ = pool.front().scores.size();
  d.by_group_.assign(num_groups, {});
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Case& c = pool[i];
    if (c.group < 0 || static_cast<std::size_t>(c.group) >= num_groups) {
      throw DataError("pool case " + std::to_string(i) + " has group " + std::to_string(c.group));
    }
    if (c.scores.size() != d.num_locations_) {
      throw DataError("pool case " + std::to_string(i) + " has a different number of scores");
    }
    d.by_group_[static_cast<std::size_t>(c.group)].push_back(i);
  }
  d.p_.resize(num_groups);
  for (std::size_t g = 0; g < num_groups; ++g) {
    d.p_[g] = static_cast<double>(d.by_group_[g].size()) / static_cast<double>(pool.size());
  }
  d.pool_ = std::move(pool);
  return d;
}

ArrivalDistribution ArrivalDistribution::synthetic(SyntheticSpec spec) {
  const std::size_t g = spec.group_probabilities.size();
  if (g == 0) throw ArgumentError("synthetic distribution needs at least one group");
  if (spec.base_scores.size() != g) throw ShapeError("base_scores needs one row per group");
  double total = 0.0;
  for (double p : spec.group_probabilities) {
    if (!(p >= 0.0)) throw ArgumentError("group probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("group probabilities must sum to 1");
  const std::size_t m = spec.base_scores.front().size();
  if (m == 0) throw ShapeError("synthetic distribution needs at least one location");
  for (const auto& row : spec.base_scores) {
    if (row.size() != m) throw ShapeError("base_scores rows differ in length");
    for (double w : row) {
      if (!(w >= 0.0 && w <= 1.0)) throw DataError("base scores must lie in [0,1]");
    }
  }
  if (!(spec.jitter >= 0.0)) throw ArgumentError("jitter must be >= 0");
  ArrivalDistribution d;
  d.num_locations_ = m;
  d.p_ = spec.group_probabilities;
  d.spec_ = std::move(spec);
  return d;
}

std::vector<double> ArrivalDistribution::synthetic_scores(int group, Rng& rng) const {
  const auto& base = spec_.base_scores[static_cast<std::size_t>(group)];
  std::vector<double> w(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    double v = base[j];
    if (spec_.jitter > 0.0) v += spec_.jitter * (2.0 * rng.uniform() - 1.0);
    w[j] = std::clamp(v, 0.0, 1.0);
  }
  return w;
}

Case ArrivalDistribution::sample(Rng& rng) const {
  if (is_empirical()) return pool_[rng.below(pool_.size())];
  const double u = rng.uniform();
  double acc = 0.0;
  int g = -1;
  for (std::size_t k = 0; k < p_.size(); ++k) {
    if (p_[k] <= 0.0) continue;
    g = static_cast<int>(k);
    acc += p_[k];
    if (u < acc) break;
  }
  return Case{g, synthetic_scores(g, rng)};
}

Case ArrivalDistribution::sample_in_group(int group, Rng& rng) const {
  if (group < 0 || static_cast<std::size_t>(group) >= p_.size() || p_[static_cast<std::size_t>(group)] <= 0.0) {
    throw ArgumentError("cannot sample group " + std::to_string(group) + ": probability zero");
  }
  if (is_empirical()) {
    const auto& members = by_group_[static_cast<std::size_t>(group)];
    return pool_[members[rng.below(members.size())]];
  }
  return Case{group, synthetic_scores(group, rng)};
}

SamplePath ArrivalDistribution::sample_path(long horizon, Rng& rng) const {
  SamplePath path;
  path.cases.reserve(static_cast<std::size_t>(horizon));
  for (long t = 0; t < horizon; ++t) path.cases.push_back(sample(rng));
  return path;
}

std::vector<SamplePath> bootstrap_paths(const ArrivalDistribution& distribution, long horizon,
                                        std::size_t n_paths, std::uint64_t seed) {
  if (n_paths == 0) throw ArgumentError("bootstrap_paths needs n_paths >= 1");
  if (horizon <= 0) throw ArgumentError("bootstrap_paths needs T >= 1");
  std::vector<SamplePath> paths(n_paths);
  detail::parallel_for(n_paths, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k, "path"));
    paths[k] = distribution.sample_path(horizon, rng);
  });
  return paths;
}

}  // namespace fairalloc
