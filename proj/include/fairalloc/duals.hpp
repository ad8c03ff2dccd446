#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairalloc/core.hpp"
#include "fairalloc/fairness.hpp"
#include "fairalloc/lp.hpp"
#include "fairalloc/sampling.hpp"

namespace fairalloc {

enum class DualMethod { SaaLp, Subgradient };

const char* to_string(DualMethod method);
DualMethod parse_dual_method(const std::string& name);

// Location opportunity costs mu and group amplifiers lambda.
struct DualSolution {
  std::vector<double> mu;
  std::vector<double> lambda;
  double objective = 0.0;  // per-case estimate of E[L(mu, lambda)]
  DualMethod method = DualMethod::SaaLp;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

std::string dual_solution_to_json(const DualSolution& duals);
// Throws DataError on malformed documents.
DualSolution dual_solution_from_json(const std::string& text);

struct SaaSample {
  SamplePath path;
  RequirementVector requirements;
};

// K paths from derive_seed(seed, k, "saa") with the rule evaluated on each.
std::vector<SaaSample> draw_saa_samples(const Instance& instance, const FairnessRule& rule,
                                        const ArrivalDistribution& distribution, std::size_t samples,
                                        std::uint64_t seed);
std::vector<SaaSample> saa_samples_from_paths(const Instance& instance, const FairnessRule& rule,
                                              const std::vector<SamplePath>& paths);

// (1/T) (sum_t max_j ((1+lambda_g(t)) w_tj - mu_j) + sum_j mu_j s_j
//        - sum_g lambda_g O_g N(g,T)).
double lagrangian_value(const Instance& instance, const SamplePath& path,
                        const RequirementVector& requirements, const std::vector<double>& mu,
                        const std::vector<double>& lambda);
// Mean of lagrangian_value over the samples.
double saa_objective(const Instance& instance, const std::vector<SaaSample>& samples,
                     const std::vector<double>& mu, const std::vector<double>& lambda);

struct SaaOptions {
  double tolerance = 1e-9;  // relative optimality gap of the outer cutting-plane loop
  std::size_t max_cuts = 2000;
  double initial_lambda_bound = 1e3;
  double max_lambda_bound = 1e8;
};

// Exact minimizer of the sample-average problem. For fixed lambda the
// minimum over mu is a transportation problem over all K*T cases with
// capacities K*s_j, so the outer problem in lambda is convex and piecewise
// linear; it is minimized with cutting planes and the least-L1 lambda among
// the minimizers is returned. mu is the componentwise-smallest optimal price
// vector at that lambda.
DualSolution solve_saa_lp(const Instance& instance, const std::vector<SaaSample>& samples,
                          const SaaOptions& options = {});

// The sample-average problem written out as one LP (free z, mu, lambda >= 0),
// variables ordered mu, lambda, z. Only practical for small K*T.
lp::LinearProgram saa_linear_program(const Instance& instance, const std::vector<SaaSample>& samples);

// solve_saa_lp with every requirement zero; lambda is exactly zero.
DualSolution solve_bp_duals(const Instance& instance, const std::vector<SaaSample>& samples);

struct SubgradientOptions {
  std::size_t iterations = 2000;
  double step_scale = 1.0;  // eta_k = step_scale / sqrt(k)
  std::size_t minibatch = 8;
  std::size_t eval_samples = 200;  // fresh paths for the reported objective
  std::optional<std::vector<double>> initial_mu;
  std::optional<std::vector<double>> initial_lambda;
};

// Projected stochastic subgradient on fresh paths, averaged over the second
// half of the iterations.
DualSolution solve_subgradient(const Instance& instance, const FairnessRule& rule,
                               const ArrivalDistribution& distribution,
                               const SubgradientOptions& options, std::uint64_t seed);
// Same descent over a frozen set of samples; minibatches are drawn from the
// set and the objective is the sample average at the returned point.
DualSolution solve_subgradient(const Instance& instance, const std::vector<SaaSample>& samples,
                               const SubgradientOptions& options, std::uint64_t seed);

}  // namespace fairalloc
