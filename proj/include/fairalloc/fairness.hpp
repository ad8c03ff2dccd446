#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairalloc/core.hpp"
#include "fairalloc/sampling.hpp"

namespace fairalloc {

// Per-group minimum requirement O_g(w) on the group's average score, with the
// group sizes N(g,T) it was computed for. Empty groups carry O_g = 0.
struct RequirementVector {
  std::vector<double> values;
  std::vector<long> counts;

  std::size_t size() const { return values.size(); }
};

enum class RuleKind { Random, Proportional, Maxmin, Custom };

using RuleFunction = std::function<RequirementVector(const Instance&, const SamplePath&)>;

struct FairnessRule {
  RuleKind kind = RuleKind::Random;
  std::string name;
  RuleFunction evaluate;

  RequirementVector operator()(const Instance& instance, const SamplePath& path) const {
    return evaluate(instance, path);
  }
};

// Weighted by s_j / sum s: the value of a uniformly random assignment.
RequirementVector random_rule(const Instance& instance, const SamplePath& path);
// Each group alone with capacities N(g,T) * s_j / T, optimally assigned.
RequirementVector proportional_rule(const Instance& instance, const SamplePath& path);
// Largest phi such that every non-empty group can average at least phi.
RequirementVector maxmin_rule(const Instance& instance, const SamplePath& path);

FairnessRule builtin_rule(RuleKind kind);
FairnessRule custom_rule(std::string name, RuleFunction evaluate);
// "random", "proportional", "maxmin". Throws ConfigError otherwise.
RuleKind parse_rule_kind(const std::string& name);
const char* to_string(RuleKind kind);

// Whether some fractional assignment meets every group requirement, with each
// group constraint relaxed by 1e-7.
bool verify_ex_post_feasibility(const Instance& instance, const SamplePath& path,
                                const RequirementVector& requirements);

struct RuleStatistics {
  std::vector<double> expected;           // E[O_g]
  std::vector<double> expected_stderr;    // standard error of E[O_g]
  std::vector<double> epsilon;            // slackness
  std::vector<double> group_probability;  // pooled frequency p_g
  std::vector<double> mean_max_score;     // pooled mean of max_j w over group g cases
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

constexpr std::size_t kDefaultRuleSamples = 200;

// Monte-Carlo estimate over K fresh paths. Path k is drawn from
// derive_seed(seed, k, "rule-stats"), so the result does not depend on the
// thread count.
RuleStatistics estimate_rule_statistics(const Instance& instance, const FairnessRule& rule,
                                        const ArrivalDistribution& distribution, std::size_t samples,
                                        std::uint64_t seed);
// Single-threaded reference; returns exactly the same numbers.
RuleStatistics estimate_rule_statistics_serial(const Instance& instance, const FairnessRule& rule,
                                               const ArrivalDistribution& distribution,
                                               std::size_t samples, std::uint64_t seed);

}  // namespace fairalloc
