#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairalloc/core.hpp"
#include "fairalloc/duals.hpp"
#include "fairalloc/fairness.hpp"
#include "fairalloc/policies.hpp"
#include "fairalloc/sampling.hpp"

namespace fairalloc {

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  std::string name;
  Instance instance;
  ArrivalDistribution distribution;
  std::optional<FairnessRule> rule;  // set when the scenario brings its own rule
};

// Two locations of 50, T = 100, groups A and B with probability 1/2 each.
// A scores (0.9, 0.7), B scores (0.2, 0.1), each perturbed by U(-jitter, jitter).
Scenario fig1_scenario(double jitter = 0.0);
constexpr double kFig1StochasticJitter = 0.05;
// The fixed path: 50 A cases followed by 50 B cases at the base scores.
SamplePath fig1_fixed_path();

// T = 100K, two locations of 50K, groups with probability 1/2; group 1 scores
// (0.57, 0) and group 2 scores (1, 0). The rule favours the larger group:
// N1 >= N2 gives O_1 = 0.285 T / N1, O_2 = 0; otherwise O_1 = 0, O_2 = T / (2 N2).
Scenario generate_hard_instance(long k);
RequirementVector hard_instance_rule(const Instance& instance, const SamplePath& path);

// Scores i.i.d. U(0, 1), equiprobable groups, capacities ceil(T / M).
Scenario uniform_scenario(long horizon, std::size_t num_locations, std::size_t num_groups);

// ---------------------------------------------------------------------------
// Runs and benchmarks

struct RunResult {
  std::string policy;
  IntegralAssignment assignment;
  double global_average = 0.0;
  std::vector<double> alpha;
  RequirementVector requirements;
  PolicyDiagnostics diagnostics;
  std::uint64_t seed = 0;
};

// Throws InvariantError if the finished assignment breaks a capacity.
RunResult run_policy(const Instance& instance, const SamplePath& path, const PolicyConfig& config,
                     std::uint64_t seed, const RequirementVector& requirements = {});

struct OfflineResult {
  double value = 0.0;  // per case
  FractionalAssignment assignment;
};

OfflineResult offline_opt(const Instance& instance, const SamplePath& path);
// Best per-case value subject to the group requirements (each relaxed by
// 1e-7). Throws RequirementInfeasible when no assignment meets them.
double offline_fair(const Instance& instance, const SamplePath& path, const RequirementVector& requirements);

// ---------------------------------------------------------------------------
// Metrics

struct PathMetrics {
  std::vector<double> ufr;       // (O_g - alpha_g) / O_g, 0 when O_g = 0
  std::vector<double> g_regret;  // min(O_g, E[O_g]) - alpha_g
  double max_ufr = 0.0;
  double median_positive_ufr = 0.0;  // median over groups with UFR_g > 0, else 0
  double global_regret = 0.0;        // E[O*_F] - global average
  double efficiency = 1.0;           // global average / OPT
};

double unfairness_ratio(double requirement, double alpha);

PathMetrics compute_metrics(const RunResult& run, const RequirementVector& requirements,
                            const std::vector<double>& expected_requirements, double opt_value,
                            double offline_fair_expectation);

// ---------------------------------------------------------------------------
// Experiments

struct PreparationOptions {
  std::size_t rule_samples = kDefaultRuleSamples;
  std::size_t dual_samples = 64;
  DualMethod dual_method = DualMethod::SaaLp;
  SubgradientOptions subgradient;
  bool theoretical_cbp = false;
  double beta = 0.1;
  PsiSpec psi;
  std::size_t offline_fair_samples = 50;
};

struct Preparation {
  RuleStatistics statistics;
  DualSolution duals;     // fairness-aware
  DualSolution bp_duals;  // requirements zeroed
  std::shared_ptr<const PsiTable> psi;
  CbpParams cbp;
  double offline_fair_expectation = 0.0;
};

// Statistics, duals and Psi for the given rule. Every stage draws from its own
// stream of `seed`, disjoint from the evaluation paths.
Preparation prepare(const Instance& instance, const ArrivalDistribution& distribution, const FairnessRule& rule,
                    const std::vector<PolicyKind>& kinds, const PreparationOptions& options, std::uint64_t seed);
PolicyConfig make_policy_config(PolicyKind kind, const Preparation& prep);

struct ExperimentSpec {
  Instance instance;
  ArrivalDistribution distribution;
  FairnessRule rule;
  std::vector<PolicyConfig> policies;
  std::vector<double> expected_requirements;
  double offline_fair_expectation = 0.0;
  std::size_t n_paths = 50;
  std::uint64_t seed = 0;
  bool check_feasibility = false;
  // When non-empty these paths are replayed instead of sampling n_paths.
  std::vector<SamplePath> fixed_paths;
};

struct PathBenchmarks {
  RequirementVector requirements;
  double opt = 0.0;
  double offline_fair = 0.0;
  bool feasible = true;
};

struct ResultRow {
  std::size_t path_id = 0;
  std::string policy;
  double global_average = 0.0;
  double opt = 0.0;
  double offline_fair = 0.0;
  std::vector<double> alpha;
  std::vector<double> requirement;
  PathMetrics metrics;
  long depletion_index = -1;
  std::vector<long> greedy_steps;
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

Estimate mean_estimate(const std::vector<double>& values);

struct PolicySummary {
  std::string policy;
  std::size_t paths = 0;
  Estimate global_average;
  Estimate efficiency;
  Estimate max_ufr;
  Estimate median_positive_ufr;
  Estimate global_regret;
  std::vector<Estimate> g_regret;
  std::vector<Estimate> ufr;
};

struct ExperimentResult {
  std::vector<PathBenchmarks> benchmarks;
  std::vector<ResultRow> rows;  // ordered by path, then by policy order in the experiment
  std::vector<PolicySummary> summaries;
  Estimate opt;
  Estimate offline_fair;
};

// Paths come from bootstrap_paths(distribution, T, n_paths, derive_seed(seed, 0, "eval"))
// unless fixed_paths is set;
// the policy on path k runs with derive_seed(seed, k, label).
ExperimentResult run_experiment(const ExperimentSpec& spec);
// Single-threaded reference with identical output.
ExperimentResult run_experiment_serial(const ExperimentSpec& spec);

std::vector<PolicySummary> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& order,
                                     std::size_t num_groups);

}  // namespace fairalloc
