#include "fairalloc/harness.hpp"

#include <algorithm>
#include <cmath>

#include "fairalloc/errors.hpp"
#include "fairalloc/lp.hpp"
#include "parallel.hpp"

namespace fairalloc {

namespace {

lp::TransportationProblem path_transportation(const Instance& instance, const SamplePath& path) {
  lp::TransportationProblem p;
  p.rows = path.size();
  p.cols = instance.num_locations();
  p.weights.reserve(p.rows * p.cols);
  for (const Case& c : path.cases) p.weights.insert(p.weights.end(), c.scores.begin(), c.scores.end());
  for (std::size_t j = 0; j < p.cols; ++j) p.capacities.push_back(static_cast<double>(instance.capacity(j)));
  return p;
}

PathBenchmarks path_benchmarks(const ExperimentSpec& spec, const SamplePath& path) {
  PathBenchmarks b;
  b.requirements = spec.rule(spec.instance, path);
  if (spec.check_feasibility && !verify_ex_post_feasibility(spec.instance, path, b.requirements)) {
    throw RequirementInfeasible("rule '" + spec.rule.name + "' is not ex-post feasible on an evaluation path");
  }
  b.opt = offline_opt(spec.instance, path).value;
  b.offline_fair = offline_fair(spec.instance, path, b.requirements);
  return b;
}

ResultRow run_cell(const ExperimentSpec& spec, const SamplePath& path, const PathBenchmarks& bench,
                   std::size_t path_id, const PolicyConfig& config) {
  const std::string label = config.label();
  const RunResult run = run_policy(spec.instance, path, config, derive_seed(spec.seed, path_id, label),
                                   bench.requirements);
  ResultRow row;
  row.path_id = path_id;
  row.policy = label;
  row.global_average = run.global_average;
  row.opt = bench.opt;
  row.offline_fair = bench.offline_fair;
  row.alpha = run.alpha;
  row.requirement = bench.requirements.values;
  row.metrics = compute_metrics(run, bench.requirements, spec.expected_requirements, bench.opt,
                                spec.offline_fair_expectation);
  row.depletion_index = run.diagnostics.depletion_index;
  row.greedy_steps = run.diagnostics.greedy_steps;
  return row;
}

ExperimentResult assemble(const ExperimentSpec& spec, std::vector<PathBenchmarks> benchmarks,
                          std::vector<ResultRow> rows) {
  ExperimentResult out;
  std::vector<double> opt;
  std::vector<double> fair;
  for (const auto& b : benchmarks) {
    opt.push_back(b.opt);
    fair.push_back(b.offline_fair);
  }
  out.opt = mean_estimate(opt);
  out.offline_fair = mean_estimate(fair);
  std::vector<std::string> order;
  for (const auto& p : spec.policies) order.push_back(p.label());
  out.summaries = summarize(rows, order, spec.instance.num_groups());
  out.benchmarks = std::move(benchmarks);
  out.rows = std::move(rows);
  return out;
}

std::vector<SamplePath> evaluation_paths(const ExperimentSpec& spec) {
  if (!spec.fixed_paths.empty()) {
    for (const auto& p : spec.fixed_paths) validate_path(spec.instance, p);
    return spec.fixed_paths;
  }
  return bootstrap_paths(spec.distribution, spec.instance.horizon(), spec.n_paths,
                         derive_seed(spec.seed, 0, "eval"));
}

void check_spec(const ExperimentSpec& spec) {
  if (spec.n_paths == 0 && spec.fixed_paths.empty()) throw ArgumentError("an experiment needs at least one path");
  if (spec.expected_requirements.size() != spec.instance.num_groups()) {
    throw ConfigError("need one expected requirement per group");
  }
  std::vector<std::string> labels;
  for (const auto& p : spec.policies) labels.push_back(p.label());
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
    throw ConfigError("policy labels must be unique");
  }
}

}  // namespace

Scenario fig1_scenario(double jitter) {
  Scenario s;
  s.name = jitter > 0.0 ? "fig1-stochastic" : "fig1";
  s.instance = Instance::create({{"loc1", 50}, {"loc2", 50}}, 100, {"A", "B"});
  s.distribution = ArrivalDistribution::synthetic({s.name, {0.5, 0.5}, {{0.9, 0.7}, {0.2, 0.1}}, jitter});
  return s;
}

SamplePath fig1_fixed_path() {
  SamplePath path;
  for (int i = 0; i < 50; ++i) path.cases.push_back(Case{0, {0.9, 0.7}});
  for (int i = 0; i < 50; ++i) path.cases.push_back(Case{1, {0.2, 0.1}});
  return path;
}

RequirementVector hard_instance_rule(const Instance& instance, const SamplePath& path) {
  RequirementVector r;
  r.counts = group_counts(path, instance.num_groups(), static_cast<long>(path.size()));
  r.values.assign(instance.num_groups(), 0.0);
  const auto t = static_cast<double>(instance.horizon());
  const long n1 = r.counts[0];
  const long n2 = r.counts[1];
  if (n1 >= n2) {
    r.values[0] = 0.285 * t / static_cast<double>(n1);
  } else {
    r.values[1] = t / (2.0 * static_cast<double>(n2));
  }
  return r;
}

Scenario generate_hard_instance(long k) {
  if (k < 1) throw ArgumentError("hard instance needs K >= 1");
  Scenario s;
  s.name = "hard-c1";
  s.instance = Instance::create({{"good", 50 * k}, {"bad", 50 * k}}, 100 * k, {"g1", "g2"});
  s.distribution = ArrivalDistribution::synthetic({s.name, {0.5, 0.5}, {{0.57, 0.0}, {1.0, 0.0}}, 0.0});
  s.rule = custom_rule("hard-c1", hard_instance_rule);
  return s;
}

Scenario uniform_scenario(long horizon, std::size_t num_locations, std::size_t num_groups) {
  if (horizon < 1 || num_locations < 1 || num_groups < 1) {
    throw ArgumentError("uniform scenario needs T, M, G >= 1");
  }
  Scenario s;
  s.name = "uniform";
  const long cap = (horizon + static_cast<long>(num_locations) - 1) / static_cast<long>(num_locations);
  std::vector<LocationSpec> locs;
  for (std::size_t j = 0; j < num_locations; ++j) locs.push_back({"loc" + std::to_string(j + 1), cap});
  std::vector<std::string> groups;
  for (std::size_t g = 0; g < num_groups; ++g) groups.push_back("g" + std::to_string(g + 1));
  s.instance = Instance::create(locs, horizon, groups);
  s.distribution = ArrivalDistribution::synthetic(
      {s.name, std::vector<double>(num_groups, 1.0 / static_cast<double>(num_groups)),
       std::vector<std::vector<double>>(num_groups, std::vector<double>(num_locations, 0.5)), 0.5});
  return s;
}

RunResult run_policy(const Instance& instance, const SamplePath& path, const PolicyConfig& config,
                     std::uint64_t seed, const RequirementVector& requirements) {
  validate_path(instance, path);
  Policy policy(instance, config, seed);
  RunResult out;
  out.policy = config.label();
  out.seed = seed;
  out.assignment = IntegralAssignment(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) {
    out.assignment.chosen[t] = static_cast<int>(policy.decide(path.cases[t]));
  }
  if (!check_integral_feasibility(instance, out.assignment)) {
    throw InvariantError(out.policy + " produced an assignment that breaks a capacity");
  }
  out.global_average = global_average_score(path, out.assignment);
  out.alpha = group_average_scores(path, out.assignment, instance.num_groups());
  out.requirements = requirements;
  out.diagnostics = policy.diagnostics();
  return out;
}

OfflineResult offline_opt(const Instance& instance, const SamplePath& path) {
  validate_path(instance, path);
  const auto sol = lp::solve_transportation(path_transportation(instance, path));
  return {sol.value / static_cast<double>(instance.horizon()), sol.assignment};
}

double offline_fair(const Instance& instance, const SamplePath& path, const RequirementVector& requirements) {
  validate_path(instance, path);
  if (requirements.values.size() != instance.num_groups()) {
    throw ShapeError("requirements need one entry per group");
  }
  const std::size_t m = instance.num_locations();
  const std::size_t t_count = path.size();
  const auto counts = group_counts(path, instance.num_groups(), static_cast<long>(t_count));

  lp::LinearProgram program;
  for (const Case& c : path.cases) {
    for (double w : c.scores) program.add_variable(w);
  }
  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<lp::Term> terms;
    for (std::size_t j = 0; j < m; ++j) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::Equal, 1.0);
  }
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<lp::Term> terms;
    for (std::size_t t = 0; t < t_count; ++t) terms.push_back({t * m + j, 1.0});
    program.add_constraint(std::move(terms), lp::Relation::LessEqual, static_cast<double>(instance.capacity(j)));
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
  const auto sol = lp::solve_lp(program);
  if (sol.status == lp::LpStatus::Infeasible) {
    throw RequirementInfeasible("no fractional assignment meets the group requirements");
  }
  if (sol.status != lp::LpStatus::Optimal) {
    throw SolverError(std::string("offline fair LP is ") + lp::to_string(sol.status));
  }
  return sol.objective / static_cast<double>(instance.horizon());
}

double unfairness_ratio(double requirement, double alpha) {
  return requirement > 0.0 ? (requirement - alpha) / requirement : 0.0;
}

PathMetrics compute_metrics(const RunResult& run, const RequirementVector& requirements,
                            const std::vector<double>& expected_requirements, double opt_value,
                            double offline_fair_expectation) {
  const std::size_t g_count = run.alpha.size();
  if (requirements.values.size() != g_count || expected_requirements.size() != g_count) {
    throw ShapeError("metrics need requirements for every group");
  }
  PathMetrics m;
  m.ufr.resize(g_count);
  m.g_regret.resize(g_count);
  std::vector<double> positive;
  m.max_ufr = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < g_count; ++g) {
    m.ufr[g] = unfairness_ratio(requirements.values[g], run.alpha[g]);
    m.g_regret[g] = std::min(requirements.values[g], expected_requirements[g]) - run.alpha[g];
    m.max_ufr = std::max(m.max_ufr, m.ufr[g]);
    if (m.ufr[g] > 0.0) positive.push_back(m.ufr[g]);
  }
  if (!positive.empty()) {
    std::sort(positive.begin(), positive.end());
    const std::size_t n = positive.size();
    m.median_positive_ufr = n % 2 == 1 ? positive[n / 2] : 0.5 * (positive[n / 2 - 1] + positive[n / 2]);
  }
  m.global_regret = offline_fair_expectation - run.global_average;
  m.efficiency = opt_value > 0.0 ? run.global_average / opt_value : 1.0;
  return m;
}

Preparation prepare(const Instance& instance, const ArrivalDistribution& distribution, const FairnessRule& rule,
                    const std::vector<PolicyKind>& kinds, const PreparationOptions& options, std::uint64_t seed) {
  auto wants = [&](PolicyKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };
  Preparation prep;
  prep.statistics =
      estimate_rule_statistics(instance, rule, distribution, options.rule_samples, derive_seed(seed, 0, "stats"));

  const bool fair_duals = wants(PolicyKind::Abp) || wants(PolicyKind::Cbp);
  if (fair_duals || wants(PolicyKind::Bp)) {
    const std::uint64_t dual_seed = derive_seed(seed, 0, "duals");
    const auto samples = draw_saa_samples(instance, rule, distribution, options.dual_samples, dual_seed);
    if (fair_duals) {
      if (options.dual_method == DualMethod::SaaLp) {
        prep.duals = solve_saa_lp(instance, samples);
        prep.duals.seed = dual_seed;
      } else {
        prep.duals = solve_subgradient(instance, rule, distribution, options.subgradient,
                                       derive_seed(seed, 0, "subgradient"));
      }
    }
    if (wants(PolicyKind::Bp)) {
      prep.bp_duals = solve_bp_duals(instance, samples);
      prep.bp_duals.seed = dual_seed;
    }
  }
  if (wants(PolicyKind::Cbp)) {
    if (options.theoretical_cbp) {
      prep.cbp = theoretical_params(options.beta, instance.num_groups(), prep.statistics.epsilon);
    } else {
      prep.cbp = empirical_cbp_params(instance);
      prep.cbp.psi = options.psi;
      prep.cbp.psi.mode = PsiSpec::Mode::DataDriven;
    }
    prep.psi = std::make_shared<const PsiTable>(build_psi_table(
        instance, distribution, prep.statistics.expected, prep.cbp, derive_seed(seed, 0, "psi")));
  }
  if (options.offline_fair_samples > 0) {
    const auto paths = bootstrap_paths(distribution, instance.horizon(), options.offline_fair_samples,
                                       derive_seed(seed, 0, "offline-fair"));
    std::vector<double> values(paths.size());
    detail::parallel_for(paths.size(), [&](std::size_t k) {
      values[k] = offline_fair(instance, paths[k], rule(instance, paths[k]));
    });
    prep.offline_fair_expectation = mean_estimate(values).mean;
  }
  return prep;
}

PolicyConfig make_policy_config(PolicyKind kind, const Preparation& prep) {
  PolicyConfig c;
  c.kind = kind;
  if (kind == PolicyKind::Bp) c.duals = prep.bp_duals;
  if (kind == PolicyKind::Abp || kind == PolicyKind::Cbp) c.duals = prep.duals;
  if (kind == PolicyKind::Cbp) {
    c.expected_requirements = prep.statistics.expected;
    c.cbp = prep.cbp;
    c.psi = prep.psi;
  }
  return c;
}

Estimate mean_estimate(const std::vector<double>& values) {
  Estimate e;
  if (values.empty()) return e;
  const auto n = static_cast<double>(values.size());
  for (double v : values) e.mean += v;
  e.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

std::vector<PolicySummary> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& order,
                                     std::size_t num_groups) {
  std::vector<PolicySummary> out;
  for (const auto& label : order) {
    std::vector<double> avg, eff, max_ufr, med_ufr, regret;
    std::vector<std::vector<double>> g_regret(num_groups), ufr(num_groups);
    for (const auto& r : rows) {
      if (r.policy != label) continue;
      avg.push_back(r.global_average);
      eff.push_back(r.metrics.efficiency);
      max_ufr.push_back(r.metrics.max_ufr);
      med_ufr.push_back(r.metrics.median_positive_ufr);
      regret.push_back(r.metrics.global_regret);
      for (std::size_t g = 0; g < num_groups; ++g) {
        g_regret[g].push_back(r.metrics.g_regret[g]);
        ufr[g].push_back(r.metrics.ufr[g]);
      }
    }
    PolicySummary s;
    s.policy = label;
    s.paths = avg.size();
    s.global_average = mean_estimate(avg);
    s.efficiency = mean_estimate(eff);
    s.max_ufr = mean_estimate(max_ufr);
    s.median_positive_ufr = mean_estimate(med_ufr);
    s.global_regret = mean_estimate(regret);
    for (std::size_t g = 0; g < num_groups; ++g) {
      s.g_regret.push_back(mean_estimate(g_regret[g]));
      s.ufr.push_back(mean_estimate(ufr[g]));
    }
    out.push_back(std::move(s));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  check_spec(spec);
  const auto paths = evaluation_paths(spec);
  std::vector<PathBenchmarks> benchmarks(paths.size());
  detail::parallel_for(paths.size(), [&](std::size_t k) { benchmarks[k] = path_benchmarks(spec, paths[k]); });
  const std::size_t p_count = spec.policies.size();
  std::vector<ResultRow> rows(paths.size() * p_count);
  detail::parallel_for(rows.size(), [&](std::size_t cell) {
    const std::size_t k = cell / p_count;
    rows[cell] = run_cell(spec, paths[k], benchmarks[k], k, spec.policies[cell % p_count]);
  });
  return assemble(spec, std::move(benchmarks), std::move(rows));
}

ExperimentResult run_experiment_serial(const ExperimentSpec& spec) {
  check_spec(spec);
  std::vector<PathBenchmarks> benchmarks;
  std::vector<ResultRow> rows;
  const std::uint64_t eval_seed = derive_seed(spec.seed, 0, "eval");
  const std::size_t n = spec.fixed_paths.empty() ? spec.n_paths : spec.fixed_paths.size();
  for (std::size_t k = 0; k < n; ++k) {
    SamplePath path;
    if (spec.fixed_paths.empty()) {
      Rng rng(derive_seed(eval_seed, k, "path"));
      path = spec.distribution.sample_path(spec.instance.horizon(), rng);
    } else {
      path = spec.fixed_paths[k];
      validate_path(spec.instance, path);
    }
    benchmarks.push_back(path_benchmarks(spec, path));
    for (const auto& config : spec.policies) rows.push_back(run_cell(spec, path, benchmarks.back(), k, config));
  }
  return assemble(spec, std::move(benchmarks), std::move(rows));
}

}  // namespace fairalloc
