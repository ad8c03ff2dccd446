#include "fairalloc/fairness.hpp"

#include <algorithm>
#include <cmath>

#include "fairalloc/errors.hpp"
#include "fairalloc/lp.hpp"
#include "parallel.hpp"

namespace fairalloc {

namespace {

RequirementVector empty_requirements(const Instance& instance, const SamplePath& path) {
  RequirementVector out;
  out.counts = group_counts(path, instance.num_groups(), static_cast<long>(path.size()));
  out.values.assign(instance.num_groups(), 0.0);
  return out;
}

void clamp_unit(RequirementVector& r) {
  for (double& v : r.values) v = std::clamp(v, 0.0, 1.0);
}

struct PathSummary {
  std::vector<double> requirement;
  std::vector<double> max_score_sum;
  std::vector<long> count;
};

PathSummary summarize_path(const Instance& instance, const FairnessRule& rule,
                           const ArrivalDistribution& distribution, std::uint64_t seed,
                           std::size_t k) {
  Rng rng(derive_seed(seed, k, "rule-stats"));
  const SamplePath path = distribution.sample_path(instance.horizon(), rng);
  PathSummary s;
  s.requirement = rule(instance, path).values;
  s.max_score_sum.assign(instance.num_groups(), 0.0);
  s.count.assign(instance.num_groups(), 0);
  for (const Case& c : path.cases) {
    s.max_score_sum[static_cast<std::size_t>(c.group)] += max_score(c);
    ++s.count[static_cast<std::size_t>(c.group)];
  }
  return s;
}

RuleStatistics reduce(const Instance& instance, const std::vector<PathSummary>& summaries,
                      std::uint64_t seed) {
  const std::size_t g_count = instance.num_groups();
  const auto k = static_cast<double>(summaries.size());
  RuleStatistics st;
  st.samples = summaries.size();
  st.seed = seed;
  st.expected.assign(g_count, 0.0);
  st.expected_stderr.assign(g_count, 0.0);
  st.epsilon.assign(g_count, 0.0);
  st.group_probability.assign(g_count, 0.0);
  st.mean_max_score.assign(g_count, 0.0);

  std::vector<double> max_sum(g_count, 0.0);
  std::vector<double> count(g_count, 0.0);
  for (const auto& s : summaries) {
    for (std::size_t g = 0; g < g_count; ++g) {
      st.expected[g] += s.requirement[g];
      max_sum[g] += s.max_score_sum[g];
      count[g] += static_cast<double>(s.count[g]);
    }
  }
  for (std::size_t g = 0; g < g_count; ++g) st.expected[g] /= k;
  if (summaries.size() > 1) {
    for (std::size_t g = 0; g < g_count; ++g) {
      double ss = 0.0;
      for (const auto& s : summaries) ss += (s.requirement[g] - st.expected[g]) * (s.requirement[g] - st.expected[g]);
      st.expected_stderr[g] = std::sqrt(ss / (k - 1.0) / k);
    }
  }
  const double total_cases = k * static_cast<double>(instance.horizon());
  for (std::size_t g = 0; g < g_count; ++g) {
    st.group_probability[g] = count[g] / total_cases;
    st.mean_max_score[g] = count[g] > 0.0 ? max_sum[g] / count[g] : 0.0;
    st.epsilon[g] = st.mean_max_score[g] - st.expected[g];
  }
  return st;
}

void check_samples(std::size_t samples) {
  if (samples == 0) throw ArgumentError("rule statistics need K >= 1");
}

}  // namespace

RequirementVector random_rule(const Instance& instance, const SamplePath& path) {
  RequirementVector out = empty_requirements(instance, path);
  const double total = static_cast<double>(instance.total_capacity());
  for (const Case& c : path.cases) {
    double v = 0.0;
    for (std::size_t j = 0; j < c.scores.size(); ++j) {
      v += static_cast<double>(instance.capacity(j)) / total * c.scores[j];
    }
    out.values[static_cast<std::size_t>(c.group)] += v;
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (out.counts[g] > 0) out.values[g] /= static_cast<double>(out.counts[g]);
  }
  clamp_unit(out);
  return out;
}

RequirementVector proportional_rule(const Instance& instance, const SamplePath& path) {
  RequirementVector out = empty_requirements(instance, path);
  const std::size_t m = instance.num_locations();
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (out.counts[g] == 0) continue;
    const auto members = group_members(path, static_cast<int>(g), static_cast<long>(path.size()));
    lp::TransportationProblem p;
    p.rows = members.size();
    p.cols = m;
    p.weights.reserve(p.rows * m);
    for (std::size_t t : members) {
      const auto& w = path.cases[t].scores;
      p.weights.insert(p.weights.end(), w.begin(), w.end());
    }
    for (std::size_t j = 0; j < m; ++j) {
      p.capacities.push_back(static_cast<double>(out.counts[g]) * instance.fractional_capacity(j));
    }
    out.values[g] = lp::solve_transportation(p).value / static_cast<double>(out.counts[g]);
  }
  clamp_unit(out);
  return out;
}

RequirementVector maxmin_rule(const Instance& instance, const SamplePath& path) {
  RequirementVector out = empty_requirements(instance, path);
  const std::size_t m = instance.num_locations();
  const std::size_t t_count = path.size();

  lp::LinearProgram program;
  program.sense = lp::Sense::Maximize;
  for (std::size_t k = 0; k < t_count * m; ++k) program.add_variable(0.0);
  const std::size_t phi = program.add_variable(1.0, -lp::kInfinity, lp::kInfinity);

  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<lp::Term> terms;
    for (std::size_t j = 0; j < m; ++j) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::LessEqual, 1.0);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<lp::Term> terms;
    for (std::size_t t = 0; t < t_count; ++t) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::LessEqual,
                           static_cast<double>(instance.capacity(j)));
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (out.counts[g] == 0) continue;
    const double inv = 1.0 / static_cast<double>(out.counts[g]);
    std::vector<lp::Term> terms{{phi, 1.0}};
    for (std::size_t t = 0; t < t_count; ++t) {
      if (path.cases[t].group != static_cast<int>(g)) continue;
      for (std::size_t j = 0; j < m; ++j) {
        const double w = path.cases[t].scores[j];
        if (w != 0.0) terms.push_back({t * m + j, -w * inv});
      }
    }
    program.add_constraint(std::move(terms), lp::Relation::LessEqual, 0.0);
  }

  const lp::LpSolution sol = lp::solve_lp(program);
  if (sol.status != lp::LpStatus::Optimal) {
    throw SolverError(std::string("maxmin LP is ") + lp::to_string(sol.status));
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (out.counts[g] > 0) out.values[g] = sol.objective;
  }
  clamp_unit(out);
  return out;
}

FairnessRule builtin_rule(RuleKind kind) {
  switch (kind) {
    case RuleKind::Random:
      return {kind, "random", random_rule};
    case RuleKind::Proportional:
      return {kind, "proportional", proportional_rule};
    case RuleKind::Maxmin:
      return {kind, "maxmin", maxmin_rule};
    case RuleKind::Custom:
      break;
  }
  throw ArgumentError("custom rules need a function; use custom_rule");
}

FairnessRule custom_rule(std::string name, RuleFunction evaluate) {
  return {RuleKind::Custom, std::move(name), std::move(evaluate)};
}

RuleKind parse_rule_kind(const std::string& name) {
  if (name == "random") return RuleKind::Random;
  if (name == "proportional") return RuleKind::Proportional;
  if (name == "maxmin") return RuleKind::Maxmin;
  throw ConfigError("unknown fairness rule '" + name + "'");
}

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::Random:
      return "random";
    case RuleKind::Proportional:
      return "proportional";
    case RuleKind::Maxmin:
      return "maxmin";
    case RuleKind::Custom:
      return "custom";
  }
  return "?";
}

bool verify_ex_post_feasibility(const Instance& instance, const SamplePath& path,
                                const RequirementVector& requirements) {
  const std::size_t m = instance.num_locations();
  const std::size_t t_count = path.size();
  if (requirements.size() != instance.num_groups()) {
    throw ShapeError("requirement vector has " + std::to_string(requirements.size()) + " groups");
  }
  const auto counts = group_counts(path, instance.num_groups(), static_cast<long>(t_count));

  lp::LinearProgram program;
  for (std::size_t k = 0; k < t_count * m; ++k) program.add_variable(0.0);
  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<lp::Term> terms;
    for (std::size_t j = 0; j < m; ++j) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::Equal, 1.0);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<lp::Term> terms;
    for (std::size_t t = 0; t < t_count; ++t) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::LessEqual,
                           static_cast<double>(instance.capacity(j)));
  }
  for (std::size_t g = 0; g < counts.size(); ++g) {
    const double need = static_cast<double>(counts[g]) * requirements.values[g] - 1e-7;
    if (need <= 0.0) continue;
    std::vector<lp::Term> terms;
    for (std::size_t t = 0; t < t_count; ++t) {
      if (path.cases[t].group != static_cast<int>(g)) continue;
      for (std::size_t j = 0; j < m; ++j) terms.push_back({t * m + j, path.cases[t].scores[j]});
    }
    program.add_constraint(std::move(terms), lp::Relation::GreaterEqual, need);
  }
  return lp::solve_lp(program).status == lp::LpStatus::Optimal;
}

RuleStatistics estimate_rule_statistics(const Instance& instance, const FairnessRule& rule,
                                        const ArrivalDistribution& distribution, std::size_t samples,
                                        std::uint64_t seed) {
  check_samples(samples);
  std::vector<PathSummary> summaries(samples);
  detail::parallel_for(samples, [&](std::size_t k) {
    summaries[k] = summarize_path(instance, rule, distribution, seed, k);
  });
  return reduce(instance, summaries, seed);
}

RuleStatistics estimate_rule_statistics_serial(const Instance& instance, const FairnessRule& rule,
                                               const ArrivalDistribution& distribution,
                                               std::size_t samples, std::uint64_t seed) {
  check_samples(samples);
  std::vector<PathSummary> summaries;
  summaries.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    summaries.push_back(summarize_path(instance, rule, distribution, seed, k));
  }
  return reduce(instance, summaries, seed);
}

}  // namespace fairalloc
