#include "fairalloc/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairalloc/errors.hpp"
#include "parallel.hpp"

namespace fairalloc {

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Rand:
      return "rand";
    case PolicyKind::Greedy:
      return "greedy";
    case PolicyKind::Bp:
      return "bp";
    case PolicyKind::Abp:
      return "abp";
    case PolicyKind::Cbp:
      return "cbp";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "rand") return PolicyKind::Rand;
  if (name == "greedy") return PolicyKind::Greedy;
  if (name == "bp") return PolicyKind::Bp;
  if (name == "abp") return PolicyKind::Abp;
  if (name == "cbp") return PolicyKind::Cbp;
  throw ConfigError("unknown policy '" + name + "'");
}

PsiTable::PsiTable(long horizon, long step, std::vector<std::vector<double>> values)
    : horizon_(horizon), step_(std::max(1L, step)), values_(std::move(values)) {}

double PsiTable::at(int group, long t) const {
  const auto& row = values_.at(static_cast<std::size_t>(group));
  const long clamped = std::clamp(t, 1L, std::max(1L, horizon_));
  const auto k = static_cast<std::size_t>((clamped - 1) / step_);
  return row[std::min(k, row.size() - 1)];
}

double theoretical_psi(double beta, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("slackness must be positive for the theoretical Psi");
  return -std::log(1.0 / beta) / (2.0 * epsilon);
}

CbpParams theoretical_params(double beta, std::size_t num_groups, const std::vector<double>& epsilon) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (epsilon.size() != num_groups) throw ConfigError("need one slackness value per group");
  for (std::size_t g = 0; g < epsilon.size(); ++g) {
    if (!(epsilon[g] > 0.0)) {
      throw ConfigError("slackness of group " + std::to_string(g) + " is " + std::to_string(epsilon[g]) +
                        "; the theoretical parameters need it positive");
    }
  }
  CbpParams p;
  p.beta = beta;
  p.c_ex = 6.0 * std::log(1.0 / beta);
  // Guard against ln(1/beta) landing one ulp above an integer multiple.
  p.c_res_per_group = static_cast<long>(std::ceil(p.c_ex - 1e-9));
  p.reserve_per_location = static_cast<long>(num_groups) * p.c_res_per_group;
  p.psi.mode = PsiSpec::Mode::Theoretical;
  p.psi.epsilon = epsilon;
  return p;
}

double beta_from_delta(double delta, std::size_t num_locations, std::size_t num_groups, long horizon) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  if (horizon < 1) throw ArgumentError("T must be at least 1");
  const double raw =
      std::pow(delta / (12.0 * static_cast<double>(num_locations + num_groups) * static_cast<double>(horizon)), 0.25);
  return std::clamp(raw, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

CbpParams empirical_cbp_params(const Instance&) {
  CbpParams p;
  p.c_ex = 0.0;
  p.c_res_per_group = CbpParams::kUnlimited;
  p.reserve_per_location = 1;
  p.psi = PsiSpec{};
  return p;
}

std::pair<long, long> binomial_interval(long n, double p, double level) {
  if (n <= 0 || p <= 0.0) return {0, 0};
  if (p >= 1.0) return {n, n};
  const double lo_mass = (1.0 - level) / 2.0;
  const double hi_mass = (1.0 + level) / 2.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double lg_n = std::lgamma(static_cast<double>(n) + 1.0);
  long lo = -1;
  long hi = n;
  double cdf = 0.0;
  for (long k = 0; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    cdf += std::exp(lg_n - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0) + kd * log_p +
                    static_cast<double>(n - k) * log_q);
    if (lo < 0 && cdf >= lo_mass) lo = k;
    if (cdf >= hi_mass) {
      hi = k;
      break;
    }
  }
  return {std::max(lo, 0L), hi};
}

double estimate_psi_data_driven(int group, long t, const Instance& instance,
                                const ArrivalDistribution& distribution, double expected_requirement,
                                const PsiSpec& spec, std::uint64_t seed) {
  if (spec.samples == 0) throw ArgumentError("data-driven Psi needs K >= 1");
  const long remaining = instance.horizon() - t;
  const double p = distribution.group_probabilities().at(static_cast<std::size_t>(group));
  const auto [lo, hi] = binomial_interval(remaining, p, spec.ci_level);
  if (hi <= 0) return 0.0;

  // Each of the K draws is one sequence of hi arrivals; its prefix sums give
  // the sum over the first n arrivals for every n in [lo, hi].
  const std::size_t k_count = spec.samples;
  const auto len = static_cast<std::size_t>(hi);
  std::vector<std::vector<double>> prefix(k_count, std::vector<double>(len + 1, 0.0));
  const std::uint64_t base = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(group), "psi-group"),
                                         static_cast<std::uint64_t>(t), "psi-time");
  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng(derive_seed(base, k, "psi-draw"));
    for (std::size_t i = 0; i < len; ++i) {
      const Case c = distribution.sample_in_group(group, rng);
      prefix[k][i + 1] = prefix[k][i] + max_score(c) - expected_requirement;
    }
  }
  const auto q_index = static_cast<std::size_t>(
      std::max(0.0, std::ceil(spec.quantile * static_cast<double>(k_count)) - 1.0));
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> sums(k_count);
  for (long n = lo; n <= hi; ++n) {
    for (std::size_t k = 0; k < k_count; ++k) sums[k] = prefix[k][static_cast<std::size_t>(n)];
    std::nth_element(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(q_index), sums.end());
    best = std::min(best, sums[q_index]);
  }
  return best;
}

PsiTable build_psi_table(const Instance& instance, const ArrivalDistribution& distribution,
                         const std::vector<double>& expected_requirements, const CbpParams& params,
                         std::uint64_t seed) {
  const std::size_t g_count = instance.num_groups();
  const long horizon = instance.horizon();
  if (params.psi.mode == PsiSpec::Mode::Theoretical) {
    if (params.psi.epsilon.size() != g_count) throw ConfigError("need one slackness value per group");
    std::vector<std::vector<double>> values(g_count);
    for (std::size_t g = 0; g < g_count; ++g) values[g] = {theoretical_psi(params.beta, params.psi.epsilon[g])};
    return PsiTable(horizon, horizon, std::move(values));
  }
  if (expected_requirements.size() != g_count) throw ConfigError("need one expected requirement per group");
  if (distribution.num_groups() != g_count) throw ConfigError("distribution and instance disagree on groups");
  const long step = params.psi.grid_step > 0 ? params.psi.grid_step : (horizon + 49) / 50;
  const std::size_t points = static_cast<std::size_t>((horizon - 1) / step + 1);
  std::vector<std::vector<double>> values(g_count, std::vector<double>(points, 0.0));
  detail::parallel_for(g_count * points, [&](std::size_t idx) {
    const std::size_t g = idx / points;
    const std::size_t k = idx % points;
    const long t = 1 + static_cast<long>(k) * step;
    values[g][k] = estimate_psi_data_driven(static_cast<int>(g), t, instance, distribution,
                                            expected_requirements[g], params.psi, seed);
  });
  return PsiTable(horizon, step, std::move(values));
}

std::size_t bp_index(const Case& c, const std::vector<double>& mu, double lambda) {
  const double a = 1.0 + lambda;
  std::size_t best = 0;
  double best_value = a * c.scores[0] - mu[0];
  for (std::size_t j = 1; j < c.scores.size(); ++j) {
    const double v = a * c.scores[j] - mu[j];
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

std::size_t greedy_index(const Case& c) {
  return static_cast<std::size_t>(std::max_element(c.scores.begin(), c.scores.end()) - c.scores.begin());
}

bool predict_to_meet(double surplus, double expected_requirement, double psi, double c_ex) {
  return surplus - expected_requirement + psi >= c_ex;
}

Policy::Policy(const Instance& instance, PolicyConfig config, std::uint64_t seed)
    : instance_(instance), config_(std::move(config)), rng_(seed) {
  const std::size_t m = instance.num_locations();
  const std::size_t g_count = instance.num_groups();
  free_ = instance.capacities();
  reserve_.assign(m, 0);
  used_.assign(m, 0);
  surplus_.assign(g_count, 0.0);
  diag_.greedy_steps.assign(g_count, 0);
  diag_.reserve_used.assign(m, 0);

  const bool uses_duals = config_.kind == PolicyKind::Bp || config_.kind == PolicyKind::Abp ||
                          config_.kind == PolicyKind::Cbp;
  if (uses_duals) {
    if (config_.duals.mu.size() != m) throw ConfigError(config_.label() + ": duals need one mu per location");
    if (config_.kind != PolicyKind::Bp && config_.duals.lambda.size() != g_count) {
      throw ConfigError(config_.label() + ": duals need one lambda per group");
    }
  }
  if (config_.kind == PolicyKind::Cbp) {
    const CbpParams& p = config_.cbp;
    if (config_.expected_requirements.size() != g_count) {
      throw ConfigError(config_.label() + ": CBP needs one expected requirement per group");
    }
    if (!config_.psi) throw ConfigError(config_.label() + ": CBP needs a Psi table");
    if (p.reserve_per_location < 0 || p.c_res_per_group < 0 || !(p.c_ex >= 0.0)) {
      throw ConfigError(config_.label() + ": CBP parameters must be non-negative");
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (p.reserve_per_location > instance.capacity(j)) {
        throw ConfigError(config_.label() + ": reserve " + std::to_string(p.reserve_per_location) +
                          " exceeds the capacity of location " + instance.locations()[j].id);
      }
      free_[j] -= p.reserve_per_location;
      reserve_[j] = p.reserve_per_location;
    }
    budget_.assign(g_count, p.c_res_per_group);
    if (std::accumulate(free_.begin(), free_.end(), 0L) == 0) {
      free_.swap(reserve_);
    }
  }
}

bool Policy::is_greedy_group(int g) const {
  return std::find(config_.greedy_groups.begin(), config_.greedy_groups.end(), g) != config_.greedy_groups.end();
}

std::size_t Policy::most_free(const std::vector<long>& pool) const {
  return static_cast<std::size_t>(std::max_element(pool.begin(), pool.end()) - pool.begin());
}

std::size_t Policy::decide_rand() {
  const std::size_t m = free_.size();
  if (config_.rand_uniform) {
    std::vector<std::size_t> open;
    for (std::size_t j = 0; j < m; ++j) {
      if (free_[j] >= 1) open.push_back(j);
    }
    return open[rng_.below(open.size())];
  }
  const long total = std::accumulate(free_.begin(), free_.end(), 0L);
  auto pick = static_cast<long>(rng_.below(static_cast<std::uint64_t>(total)));
  for (std::size_t j = 0; j < m; ++j) {
    if (pick < free_[j]) return j;
    pick -= free_[j];
  }
  throw InvariantError("random draw fell outside the remaining capacity");
}

std::size_t Policy::decide_capped(std::size_t wanted) {
  if (free_[wanted] >= 1) return wanted;
  ++diag_.fallback_steps;
  return most_free(free_);
}

std::size_t Policy::decide_cbp(const Case& c) {
  const auto g = static_cast<std::size_t>(c.group);
  bool pred = false;
  if (!is_greedy_group(c.group)) {
    const double psi = config_.psi->at(c.group, t_ + 1);
    pred = predict_to_meet(surplus_[g], config_.expected_requirements[g], psi, config_.cbp.c_ex);
  }
  last_predicted_ = pred;
  if (!pred) ++diag_.greedy_steps[g];
  const std::size_t wanted = pred ? bp_index(c, config_.duals.mu, config_.duals.lambda[g]) : greedy_index(c);

  std::size_t chosen;
  if (free_[wanted] >= 1) {
    chosen = wanted;
    --free_[chosen];
  } else if (!pred && std::min(budget_[g], reserve_[wanted]) > 0) {
    chosen = wanted;
    --reserve_[chosen];
    if (budget_[g] != CbpParams::kUnlimited) --budget_[g];
    ++diag_.reserve_used[chosen];
  } else {
    chosen = most_free(free_);
    if (free_[chosen] < 1) throw InvariantError("CBP found no free capacity");
    --free_[chosen];
    ++diag_.fallback_steps;
  }
  surplus_[g] += c.scores[chosen] - config_.expected_requirements[g];
  return chosen;
}

std::size_t Policy::decide(const Case& c) {
  if (c.scores.size() != free_.size()) throw ShapeError("case has the wrong number of scores");
  if (c.group < 0 || static_cast<std::size_t>(c.group) >= instance_.num_groups()) {
    throw DataError("case has unknown group " + std::to_string(c.group));
  }
  const long remaining = std::accumulate(free_.begin(), free_.end(), 0L) +
                         std::accumulate(reserve_.begin(), reserve_.end(), 0L);
  if (remaining < 1) throw InvariantError("no remaining capacity at case " + std::to_string(t_ + 1));

  std::size_t chosen = 0;
  const auto g = static_cast<std::size_t>(c.group);
  const std::vector<long> before = free_;
  switch (config_.kind) {
    case PolicyKind::Rand:
      chosen = decide_rand();
      --free_[chosen];
      break;
    case PolicyKind::Greedy: {
      chosen = free_.size();
      for (std::size_t j = 0; j < free_.size(); ++j) {
        if (free_[j] >= 1 && (chosen == free_.size() || c.scores[j] > c.scores[chosen])) chosen = j;
      }
      --free_[chosen];
      break;
    }
    case PolicyKind::Bp:
    case PolicyKind::Abp: {
      if (is_greedy_group(c.group)) {
        chosen = decide_capped(greedy_index(c));
        ++diag_.greedy_steps[g];
      } else {
        const double lambda = config_.kind == PolicyKind::Abp ? config_.duals.lambda[g] : 0.0;
        chosen = decide_capped(bp_index(c, config_.duals.mu, lambda));
      }
      --free_[chosen];
      break;
    }
    case PolicyKind::Cbp:
      chosen = decide_cbp(c);
      break;
  }
  ++used_[chosen];
  ++t_;
  if (diag_.depletion_index < 0 && before[chosen] > 0 && free_[chosen] == 0) diag_.depletion_index = t_;
  if (config_.kind == PolicyKind::Cbp && std::accumulate(free_.begin(), free_.end(), 0L) == 0) {
    free_ = reserve_;
    std::fill(reserve_.begin(), reserve_.end(), 0L);
  }
  return chosen;
}

}  // namespace fairalloc
