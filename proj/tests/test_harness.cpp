#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fairalloc/errors.hpp"
#include "fairalloc/harness.hpp"
#include "fixtures.hpp"

using namespace fairalloc;

namespace {

bool same_paths(const std::vector<SamplePath>& a, const std::vector<SamplePath>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size()) return false;
    for (std::size_t t = 0; t < a[k].size(); ++t) {
      if (a[k].cases[t].group != b[k].cases[t].group || a[k].cases[t].scores != b[k].cases[t].scores) return false;
    }
  }
  return true;
}

ExperimentSpec small_experiment(const std::vector<PolicyKind>& kinds, std::size_t n_paths, std::uint64_t seed) {
  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  const FairnessRule rule = builtin_rule(RuleKind::Proportional);
  PreparationOptions opts;
  opts.rule_samples = 40;
  opts.dual_samples = 8;
  opts.offline_fair_samples = 10;
  opts.psi.samples = 20;
  const Preparation prep = prepare(s.instance, s.distribution, rule, kinds, opts, seed);
  ExperimentSpec spec{s.instance, s.distribution, rule, {}, prep.statistics.expected,
                      prep.offline_fair_expectation, n_paths, seed};
  for (PolicyKind k : kinds) spec.policies.push_back(make_policy_config(k, prep));
  return spec;
}

}  // namespace

TEST_CASE("bootstrap_paths") {
  const auto dist = ArrivalDistribution::empirical(testing::fig1_path().cases, 2);
  const auto a = bootstrap_paths(dist, 100, 5, 11);
  CHECK(same_paths(a, bootstrap_paths(dist, 100, 5, 11)));
  CHECK_FALSE(same_paths(a, bootstrap_paths(dist, 100, 5, 12)));
  // Path k depends only on (seed, k).
  const auto longer = bootstrap_paths(dist, 100, 8, 11);
  CHECK(same_paths(a, std::vector<SamplePath>(longer.begin(), longer.begin() + 5)));

  const auto one = ArrivalDistribution::empirical({Case{0, {0.3, 0.4}}}, 1);
  for (const auto& p : bootstrap_paths(one, 7, 3, 1)) {
    CHECK(p.size() == 7);
    for (const auto& c : p.cases) CHECK(c.scores == std::vector<double>{0.3, 0.4});
  }
  const auto many = bootstrap_paths(dist, 1175, 50, 3);
  CHECK(many.size() == 50);
  for (const auto& p : many) CHECK(p.size() == 1175);
  CHECK_THROWS_AS(ArrivalDistribution::empirical({}, 1), ArgumentError);
}

TEST_CASE("run_policy: greedy on the fig1 path") {
  const Scenario s = fig1_scenario();
  PolicyConfig greedy;
  greedy.kind = PolicyKind::Greedy;
  const RunResult r = run_policy(s.instance, fig1_fixed_path(), greedy, 1);
  CHECK(r.global_average == doctest::Approx(0.5));
  for (std::size_t t = 0; t < 50; ++t) CHECK(r.assignment.chosen[t] == 0);
  for (std::size_t t = 50; t < 100; ++t) CHECK(r.assignment.chosen[t] == 1);
  CHECK(r.alpha[0] == doctest::Approx(0.9));
  CHECK(r.alpha[1] == doctest::Approx(0.1));
  CHECK(r.diagnostics.depletion_index == 50);
}

TEST_CASE("run_policy: rand and forced cases") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 30; ++rep) {
    auto sp = testing::random_small_problem(rng, 20, 3, 2);
    PolicyConfig rand;
    rand.kind = PolicyKind::Rand;
    const RunResult r = run_policy(sp.instance, sp.path, rand, static_cast<std::uint64_t>(rep));
    CHECK(r.assignment.complete());
    CHECK(check_integral_feasibility(sp.instance, r.assignment));
    CHECK(r.global_average == doctest::Approx(global_average_score(sp.path, r.assignment)));
  }
  const Instance one = Instance::create({{"only", 1}}, 1, {"g"});
  SamplePath p;
  p.cases = {Case{0, {0.42}}};
  PolicyConfig greedy;
  const RunResult r = run_policy(one, p, greedy, 1);
  CHECK(r.assignment.chosen[0] == 0);
  CHECK(r.global_average == doctest::Approx(0.42));
}

TEST_CASE("offline_opt") {
  const Scenario s = fig1_scenario();
  CHECK(offline_opt(s.instance, fig1_fixed_path()).value == doctest::Approx(0.5));

  const Instance inst = Instance::create({{"a", 3}, {"b", 3}}, 4, {"g"});
  SamplePath flat;
  for (int i = 0; i < 4; ++i) flat.cases.push_back(Case{0, {0.35, 0.35}});
  CHECK(offline_opt(inst, flat).value == doctest::Approx(0.35));

  const Instance single = Instance::create({{"a", 4}}, 4, {"g"});
  SamplePath varied;
  for (double w : {0.1, 0.2, 0.6, 0.7}) varied.cases.push_back(Case{0, {w}});
  CHECK(offline_opt(single, varied).value == doctest::Approx(0.4));
}

TEST_CASE("offline_fair") {
  const Scenario s = fig1_scenario();
  const SamplePath path = fig1_fixed_path();
  CHECK(offline_fair(s.instance, path, proportional_rule(s.instance, path)) == doctest::Approx(0.475));
  CHECK(offline_fair(s.instance, path, maxmin_rule(s.instance, path)) == doctest::Approx(0.45));

  RequirementVector zero{{0.0, 0.0}, {50, 50}};
  CHECK(offline_fair(s.instance, path, zero) == doctest::Approx(offline_opt(s.instance, path).value));

  RequirementVector impossible{{0.9, 0.9}, {50, 50}};
  CHECK_THROWS_AS(offline_fair(s.instance, path, impossible), RequirementInfeasible);
}

TEST_CASE("metrics") {
  CHECK(unfairness_ratio(0.8, 0.6) == doctest::Approx(0.25));
  CHECK(unfairness_ratio(0.8, 0.8) == 0.0);
  CHECK(unfairness_ratio(0.0, 0.3) == 0.0);

  RunResult run;
  run.alpha = {0.7, 0.6, 1.0};
  run.global_average = 0.45;
  const RequirementVector req{{0.8, 0.8, 0.5}, {1, 1, 1}};
  const PathMetrics m = compute_metrics(run, req, {0.75, 0.9, 0.5}, 0.5, 0.48);
  CHECK(m.g_regret[0] == doctest::Approx(0.05));
  CHECK(m.ufr[1] == doctest::Approx(0.25));
  CHECK(m.ufr[2] == doctest::Approx(-1.0));
  CHECK(m.max_ufr == doctest::Approx(0.25));
  CHECK(m.median_positive_ufr == doctest::Approx(0.5 * (0.125 + 0.25)));
  CHECK(m.global_regret == doctest::Approx(0.03));
  CHECK(m.efficiency == doctest::Approx(0.9));

  RunResult fair;
  fair.alpha = {0.9};
  const PathMetrics none = compute_metrics(fair, RequirementVector{{0.8}, {1}}, {0.8}, 0.0, 0.0);
  CHECK(none.median_positive_ufr == 0.0);
  CHECK(none.efficiency == 1.0);
}

TEST_CASE("UFR never exceeds one") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) CHECK(unfairness_ratio(u(rng), u(rng)) <= 1.0);
}

TEST_CASE("hard instance") {
  const Scenario s = generate_hard_instance(1);
  CHECK(s.instance.horizon() == 100);
  CHECK(s.instance.capacities() == std::vector<long>{50, 50});
  CHECK(s.distribution.group_probabilities() == std::vector<double>{0.5, 0.5});
  REQUIRE(s.rule.has_value());

  SamplePath even;
  for (int i = 0; i < 50; ++i) even.cases.push_back(Case{0, {0.57, 0.0}});
  for (int i = 0; i < 50; ++i) even.cases.push_back(Case{1, {1.0, 0.0}});
  const auto r = (*s.rule)(s.instance, even);
  CHECK(r.values[0] == doctest::Approx(0.57));
  CHECK(r.values[1] == 0.0);

  for (const auto& p : bootstrap_paths(s.distribution, 100, 40, 5)) {
    CHECK(verify_ex_post_feasibility(s.instance, p, (*s.rule)(s.instance, p)));
  }
  const Scenario big = generate_hard_instance(3);
  CHECK(big.instance.horizon() == 300);
  CHECK(big.instance.capacities() == std::vector<long>{150, 150});
  CHECK_THROWS_AS(generate_hard_instance(0), ArgumentError);
}

TEST_CASE("experiment grid, sandwich and benchmarks") {
  const std::vector<PolicyKind> kinds{PolicyKind::Rand, PolicyKind::Greedy, PolicyKind::Bp, PolicyKind::Abp,
                                      PolicyKind::Cbp};
  const ExperimentSpec spec = small_experiment(kinds, 12, 31);
  const ExperimentResult res = run_experiment(spec);
  CHECK(res.rows.size() == 12 * kinds.size());
  CHECK(res.summaries.size() == kinds.size());
  for (const auto& row : res.rows) {
    CHECK(row.global_average <= row.opt + 1e-7);
    CHECK(row.offline_fair <= row.opt + 1e-7);
    CHECK(row.metrics.efficiency <= 1.0 + 1e-7);
    CHECK(row.metrics.efficiency >= 0.0);
  }
  for (const auto& b : res.benchmarks) CHECK(b.feasible);
  CHECK(res.summaries[0].policy == "rand");
  CHECK(res.summaries[0].efficiency.mean < 1.0);
  for (const auto& s : res.summaries) CHECK(s.paths == 12);
}

TEST_CASE("empty policy list gives benchmarks only") {
  const ExperimentSpec spec = small_experiment({}, 4, 9);
  const ExperimentResult res = run_experiment(spec);
  CHECK(res.rows.empty());
  CHECK(res.summaries.empty());
  CHECK(res.benchmarks.size() == 4);
  CHECK(res.opt.mean > 0.0);
}

TEST_CASE("parallel and serial experiments agree") {
  const ExperimentSpec spec =
      small_experiment({PolicyKind::Rand, PolicyKind::Abp, PolicyKind::Cbp}, 6, 17);
  const ExperimentResult a = run_experiment(spec);
  const ExperimentResult b = run_experiment_serial(spec);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].path_id == b.rows[i].path_id);
    CHECK(a.rows[i].policy == b.rows[i].policy);
    CHECK(a.rows[i].global_average == b.rows[i].global_average);
    CHECK(a.rows[i].alpha == b.rows[i].alpha);
    CHECK(a.rows[i].offline_fair == b.rows[i].offline_fair);
  }
  const ExperimentResult again = run_experiment(spec);
  for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].global_average == again.rows[i].global_average);
}

TEST_CASE("adding a policy does not change another policy's draws") {
  const ExperimentResult one = run_experiment(small_experiment({PolicyKind::Rand}, 5, 23));
  const ExperimentResult two = run_experiment(small_experiment({PolicyKind::Greedy, PolicyKind::Rand}, 5, 23));
  for (std::size_t k = 0; k < 5; ++k) CHECK(one.rows[k].global_average == two.rows[2 * k + 1].global_average);
}

TEST_CASE("CBP greedy-step count matches predictions") {
  const ExperimentSpec spec = small_experiment({PolicyKind::Cbp}, 3, 41);
  const auto paths = bootstrap_paths(spec.distribution, spec.instance.horizon(), 3, 5);
  for (const auto& p : paths) {
    Policy policy(spec.instance, spec.policies[0], 7);
    std::vector<long> greedy(spec.instance.num_groups(), 0);
    for (const auto& c : p.cases) {
      policy.decide(c);
      if (!policy.last_predicted()) ++greedy[static_cast<std::size_t>(c.group)];
    }
    CHECK(policy.diagnostics().greedy_steps == greedy);
  }
}

TEST_CASE("depletion index is the first step a free pool empties") {
  const ExperimentSpec spec = small_experiment({PolicyKind::Bp}, 1, 3);
  const auto paths = bootstrap_paths(spec.distribution, spec.instance.horizon(), 4, 6);
  for (const auto& p : paths) {
    Policy policy(spec.instance, spec.policies[0], 1);
    long first = -1;
    for (std::size_t t = 0; t < p.size(); ++t) {
      policy.decide(p.cases[t]);
      const auto& f = policy.free_capacity();
      if (first < 0 && std::find(f.begin(), f.end(), 0L) != f.end()) first = static_cast<long>(t) + 1;
    }
    CHECK(policy.diagnostics().depletion_index == first);
  }
}

TEST_CASE("fixed paths are replayed") {
  ExperimentSpec spec = small_experiment({PolicyKind::Greedy}, 0, 5);
  spec.fixed_paths = {fig1_fixed_path()};
  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].global_average == doctest::Approx(0.5));
  CHECK(res.rows[0].opt == doctest::Approx(0.5));
  CHECK(res.rows[0].offline_fair == doctest::Approx(0.475));
}
