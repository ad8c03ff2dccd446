#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fairalloc/core.hpp"
#include "fairalloc/duals.hpp"
#include "fairalloc/sampling.hpp"

namespace fairalloc {

enum class PolicyKind { Rand, Greedy, Bp, Abp, Cbp };

const char* to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& name);

// Psi(g, t) sampled on a grid of case indices and read as a step function.
class PsiTable {
 public:
  PsiTable() = default;
  PsiTable(long horizon, long step, std::vector<std::vector<double>> values);

  // Value for group g before case t (1-based); the last grid point <= t.
  double at(int group, long t) const;
  long step() const { return step_; }
  const std::vector<std::vector<double>>& values() const { return values_; }

 private:
  long horizon_ = 0;
  long step_ = 1;
  std::vector<std::vector<double>> values_;  // [g][grid index]
};

struct PsiSpec {
  enum class Mode { Theoretical, DataDriven };
  Mode mode = Mode::DataDriven;
  std::vector<double> epsilon;  // Theoretical
  std::size_t samples = 100;    // DataDriven: K per n
  double quantile = 0.10;
  double ci_level = 0.90;
  long grid_step = 0;  // 0 selects ceil(T / 50)
};

struct CbpParams {
  static constexpr long kUnlimited = std::numeric_limits<long>::max();

  double beta = 0.1;
  double c_ex = 0.0;
  long c_res_per_group = kUnlimited;
  long reserve_per_location = 1;
  PsiSpec psi;
};

// Cex = 6 ln(1/beta), Cres = ceil(Cex), CTrueRes = G * Cres,
// Psi_g = -ln(1/beta) / (2 eps_g). Throws ConfigError unless 0 < beta < 1
// and every eps_g > 0.
CbpParams theoretical_params(double beta, std::size_t num_groups, const std::vector<double>& epsilon);
double theoretical_psi(double beta, double epsilon);
// (delta / (12 (M+G) T))^(1/4), clamped into (0, 1).
double beta_from_delta(double delta, std::size_t num_locations, std::size_t num_groups, long horizon);
// Unlimited group budgets, one reserved unit per location, data-driven Psi.
CbpParams empirical_cbp_params(const Instance& instance);

// Two-sided binomial(n, p) interval holding `level` of the mass, from the
// (1-level)/2 and (1+level)/2 quantiles.
std::pair<long, long> binomial_interval(long n, double p, double level);

// Lower `quantile` of sum_i (max_j w_ij - E[O_g]) over the remaining group-g
// arrivals, minimized over the plausible arrival counts.
double estimate_psi_data_driven(int group, long t, const Instance& instance,
                                const ArrivalDistribution& distribution, double expected_requirement,
                                const PsiSpec& spec, std::uint64_t seed);
PsiTable build_psi_table(const Instance& instance, const ArrivalDistribution& distribution,
                         const std::vector<double>& expected_requirements, const CbpParams& params,
                         std::uint64_t seed);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Greedy;
  std::string name;  // label in reports, defaults to the kind
  DualSolution duals;
  std::vector<double> expected_requirements;  // Cbp
  CbpParams cbp;
  std::shared_ptr<const PsiTable> psi;  // Cbp, filled by build_psi_table
  bool rand_uniform = false;            // Rand: uniform over open locations
  // Groups listed here are routed greedily by Bp/Abp/Cbp (e.g. unseen groups).
  std::vector<int> greedy_groups;

  std::string label() const { return name.empty() ? to_string(kind) : name; }
};

// argmax_j (1 + lambda_g) w_j - mu_j, smallest index on ties.
std::size_t bp_index(const Case& c, const std::vector<double>& mu, double lambda);
// argmax_j w_j over all locations, smallest index on ties.
std::size_t greedy_index(const Case& c);

bool predict_to_meet(double surplus, double expected_requirement, double psi, double c_ex);

struct PolicyDiagnostics {
  long depletion_index = -1;  // T^emp: first case after which a pool hit zero
  std::vector<long> greedy_steps;        // per group
  std::vector<long> reserve_used;        // per location
  long fallback_steps = 0;
};

// Online state machine for one sample path.
class Policy {
 public:
  Policy(const Instance& instance, PolicyConfig config, std::uint64_t seed);

  std::size_t decide(const Case& c);

  long t() const { return t_; }
  const std::vector<long>& free_capacity() const { return free_; }
  const std::vector<long>& reserve_capacity() const { return reserve_; }
  const std::vector<long>& group_budget() const { return budget_; }
  const std::vector<double>& surplus() const { return surplus_; }
  const std::vector<long>& used() const { return used_; }
  const PolicyDiagnostics& diagnostics() const { return diag_; }
  // Whether predict_to_meet held on the last Cbp decision.
  bool last_predicted() const { return last_predicted_; }

 private:
  std::size_t most_free(const std::vector<long>& pool) const;
  std::size_t decide_rand();
  std::size_t decide_capped(std::size_t wanted);
  std::size_t decide_cbp(const Case& c);
  bool is_greedy_group(int g) const;

  const Instance& instance_;
  PolicyConfig config_;
  Rng rng_;
  long t_ = 0;
  std::vector<long> free_;
  std::vector<long> reserve_;
  std::vector<long> budget_;
  std::vector<double> surplus_;
  std::vector<long> used_;
  PolicyDiagnostics diag_;
  bool last_predicted_ = false;
};

}  // namespace fairalloc
