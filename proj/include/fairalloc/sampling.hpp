#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fairalloc/core.hpp"

namespace fairalloc {

// Seed for the stream identified by (master, index, name). Streams for
// different names or indices are unrelated, so adding a consumer never shifts
// another consumer's draws.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view name = {});

// Engine plus the two draws the library needs, implemented by hand so results
// do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// Synthetic arrivals: group g with probability p_g, scores
// clamp(base[g][j] + jitter * U(-1, 1), 0, 1), independent across j.
struct SyntheticSpec {
  std::string name;
  std::vector<double> group_probabilities;
  std::vector<std::vector<double>> base_scores;  // G x M
  double jitter = 0.0;
};

// The arrival distribution P: either i.i.d. draws from a pool of cases or a
// synthetic generator.
class ArrivalDistribution {
 public:
  static ArrivalDistribution empirical(std::vector<Case> pool, std::size_t num_groups);
  static ArrivalDistribution synthetic(SyntheticSpec spec);

  bool is_empirical() const { return !pool_.empty(); }
  const std::vector<Case>& pool() const { return pool_; }
  const SyntheticSpec& spec() const { return spec_; }

  std::size_t num_groups() const { return p_.size(); }
  std::size_t num_locations() const { return num_locations_; }
  const std::vector<double>& group_probabilities() const { return p_; }

  Case sample(Rng& rng) const;
  // A case drawn from P conditioned on its group. Throws ArgumentError when
  // the group has probability zero.
  Case sample_in_group(int group, Rng& rng) const;
  SamplePath sample_path(long horizon, Rng& rng) const;

 private:
  std::vector<Case> pool_;
  std::vector<std::vector<std::size_t>> by_group_;
  SyntheticSpec spec_;
  std::vector<double> p_;
  std::size_t num_locations_ = 0;

  std::vector<double> synthetic_scores(int group, Rng& rng) const;
};

// n_paths i.i.d. paths of length T. Path k uses derive_seed(seed, k, "path").
std::vector<SamplePath> bootstrap_paths(const ArrivalDistribution& distribution, long horizon,
                                        std::size_t n_paths, std::uint64_t seed);

}  // namespace fairalloc
