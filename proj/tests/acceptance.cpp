// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <random>
#include <string>
#include <vector>

#include "fairalloc/cli.hpp"
#include "fairalloc/duals.hpp"
#include "fairalloc/errors.hpp"
#include "fairalloc/fairness.hpp"
#include "fairalloc/harness.hpp"
#include "fairalloc/policies.hpp"
#include "fixtures.hpp"

using namespace fairalloc;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

const std::vector<RuleKind> kRules{RuleKind::Random, RuleKind::Proportional, RuleKind::Maxmin};

Outcome fig1_suite() {
  const auto start = Clock::now();
  const Scenario s = fig1_scenario();
  const SamplePath path = fig1_fixed_path();
  Outcome out;
  auto expect = [&](const std::string& what, double got, double want) {
    if (!near(got, want, 1e-6)) {
      out.pass = false;
      out.detail += what + "=" + fmt("%.9g", got) + " (want " + fmt("%.9g", want) + ") ";
    }
  };
  const auto r = random_rule(s.instance, path);
  expect("random.A", r.values[0], 0.8);
  expect("random.B", r.values[1], 0.15);
  const auto p = proportional_rule(s.instance, path);
  expect("proportional.A", p.values[0], 0.8);
  expect("proportional.B", p.values[1], 0.15);
  const auto mm = maxmin_rule(s.instance, path);
  expect("maxmin.A", mm.values[0], 0.2);
  expect("maxmin.B", mm.values[1], 0.2);
  expect("opt", offline_opt(s.instance, path).value, 0.5);
  expect("fair.proportional", offline_fair(s.instance, path, p), 0.475);
  expect("fair.maxmin", offline_fair(s.instance, path, mm), 0.45);
  const double secs = seconds_since(start);
  if (secs >= 1.0) out.pass = false;
  out.detail += "9 values within 1e-6, " + fmt("%.3f s", secs);
  return out;
}

Outcome brute_force_equivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  Outcome out;
  int fair_checked = 0;
  double worst_opt = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    auto sp = testing::random_small_problem(rng, 8, 3, 3, rep % 4 == 0);
    const double t = static_cast<double>(sp.path.size());
    const double brute = testing::brute_force_opt(sp.instance, sp.path) / t;
    const double opt = offline_opt(sp.instance, sp.path).value;
    worst_opt = std::max(worst_opt, std::abs(opt - brute));
    if (std::abs(opt - brute) > 1e-9) out.pass = false;

    const auto mm = maxmin_rule(sp.instance, sp.path);
    double phi = 0.0;
    for (std::size_t g = 0; g < mm.size(); ++g) {
      if (mm.counts[g] > 0) phi = mm.values[g];
    }
    if (phi < testing::brute_force_maxmin(sp.instance, sp.path) - 1e-9) out.pass = false;

    const auto req = builtin_rule(kRules[static_cast<std::size_t>(rep) % 3])(sp.instance, sp.path);
    const double integral = testing::brute_force_fair(sp.instance, sp.path, req.values);
    if (integral >= 0.0) {
      ++fair_checked;
      if (offline_fair(sp.instance, sp.path, req) < integral - 1e-9) out.pass = false;
    }
  }
  const double secs = seconds_since(start);
  if (secs >= 30.0) out.pass = false;
  out.detail = "200 instances, max |opt - brute| = " + fmt("%.2e", worst_opt) + ", " +
               std::to_string(fair_checked) + " integral-feasible fair checks, " + fmt("%.2f s", secs);
  return out;
}

Outcome dual_upper_bound() {
  const auto start = Clock::now();
  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  Outcome out;
  for (RuleKind kind : kRules) {
    const FairnessRule rule = builtin_rule(kind);
    const auto samples = draw_saa_samples(s.instance, rule, s.distribution, 64, 301);
    const DualSolution d = solve_saa_lp(s.instance, samples);
    const auto paths = bootstrap_paths(s.distribution, s.instance.horizon(), 200, 302);
    std::vector<double> lag, fair;
    for (const auto& p : paths) {
      const auto req = rule(s.instance, p);
      lag.push_back(lagrangian_value(s.instance, p, req, d.mu, d.lambda));
      fair.push_back(offline_fair(s.instance, p, req));
    }
    const Estimate l = mean_estimate(lag);
    const Estimate f = mean_estimate(fair);
    const bool ok = l.mean >= f.mean - 2.0 * f.se;
    out.pass = out.pass && ok;
    out.detail += std::string(to_string(kind)) + ": L=" + fmt("%.4f", l.mean) + " fair=" + fmt("%.4f", f.mean) +
                  " se=" + fmt("%.4f", f.se) + "; ";
  }
  const double secs = seconds_since(start);
  if (secs >= 60.0) out.pass = false;
  out.detail += fmt("%.2f s", secs);
  return out;
}

Outcome kkt_capacity() {
  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  Outcome out;
  const double t = static_cast<double>(s.instance.horizon());
  for (RuleKind kind : kRules) {
    const FairnessRule rule = builtin_rule(kind);
    const auto samples = draw_saa_samples(s.instance, rule, s.distribution, 64, 301);
    const DualSolution d = solve_saa_lp(s.instance, samples);
    Rng rng(401);
    const int n = 10000;
    std::vector<double> hits(s.instance.num_locations(), 0.0);
    for (int i = 0; i < n; ++i) {
      const Case c = s.distribution.sample(rng);
      hits[bp_index(c, d.mu, d.lambda[static_cast<std::size_t>(c.group)])] += 1.0;
    }
    out.detail += std::string(to_string(kind)) + ":";
    for (std::size_t j = 0; j < hits.size(); ++j) {
      const double p = hits[j] / n;
      const double load = t * p;
      const double sigma = t * std::sqrt(p * (1.0 - p) / n);
      const double cap = static_cast<double>(s.instance.capacity(j));
      if (load > cap + 3.0 * sigma) out.pass = false;
      out.detail += " " + fmt("%.2f", load) + "<=" + fmt("%.2f", cap + 3.0 * sigma);
    }
    out.detail += "; ";
  }
  return out;
}

Outcome policy_invariants() {
  std::mt19937_64 rng(77);
  Outcome out;
  int triples = 0;
  int cbp_runs = 0;
  const std::vector<PolicyKind> kinds{PolicyKind::Rand, PolicyKind::Greedy, PolicyKind::Bp, PolicyKind::Abp,
                                      PolicyKind::Cbp};
  std::string failure;
  for (int rep = 0; rep < 100; ++rep) {
    auto sp = testing::random_small_problem(rng, 30, 4, 3);
    const Instance& inst = sp.instance;
    const auto dist = ArrivalDistribution::empirical(sp.path.cases, inst.num_groups());
    const FairnessRule rule = builtin_rule(kRules[static_cast<std::size_t>(rep) % 3]);
    const auto samples = draw_saa_samples(inst, rule, dist, 4, 1000 + rep);
    const DualSolution duals = solve_saa_lp(inst, samples);
    const DualSolution bp = solve_bp_duals(inst, samples);
    const auto stats = estimate_rule_statistics(inst, rule, dist, 8, 2000 + rep);

    long min_cap = inst.capacity(0);
    for (std::size_t j = 0; j < inst.num_locations(); ++j) min_cap = std::min(min_cap, inst.capacity(j));

    for (PolicyKind kind : kinds) {
      PolicyConfig config;
      config.kind = kind;
      config.duals = kind == PolicyKind::Bp ? bp : duals;
      config.rand_uniform = rep % 2 == 1;
      if (kind == PolicyKind::Cbp) {
        config.expected_requirements = stats.expected;
        config.cbp = empirical_cbp_params(inst);
        config.cbp.reserve_per_location = std::min<long>(rep % 3, min_cap);
        config.cbp.c_res_per_group = rep % 2 == 0 ? CbpParams::kUnlimited : 1 + rep % 4;
        config.cbp.c_ex = 0.5 * (rep % 3);
        config.cbp.psi.samples = 20;
        config.psi = std::make_shared<const PsiTable>(
            build_psi_table(inst, dist, stats.expected, config.cbp, 3000 + rep));
        ++cbp_runs;
      }
      Policy policy(inst, config, derive_seed(5, rep, to_string(kind)));
      IntegralAssignment a(sp.path.size());
      const long total = inst.total_capacity();
      for (std::size_t t = 0; t < sp.path.size(); ++t) {
        const auto reserve_before = policy.reserve_capacity();
        const auto budget_before = policy.group_budget();
        a.chosen[t] = static_cast<int>(policy.decide(sp.path.cases[t]));
        long pools = 0;
        for (long f : policy.free_capacity()) pools += f;
        for (long r : policy.reserve_capacity()) pools += r;
        long assigned = 0;
        for (long u : policy.used()) assigned += u;
        if (pools + assigned != total || assigned != static_cast<long>(t) + 1) failure = "pool accounting";
        for (long f : policy.free_capacity()) {
          if (f < 0) failure = "negative free capacity";
        }
        if (kind == PolicyKind::Cbp) {
          const auto& r = policy.reserve_capacity();
          bool reserve_dropped = false;
          bool folded = true;
          for (long v : r) folded = folded && v == 0;
          for (std::size_t j = 0; j < r.size(); ++j) {
            if (r[j] < 0) failure = "negative reserve";
            if (!folded && r[j] < reserve_before[j]) reserve_dropped = true;
          }
          if (reserve_dropped && policy.last_predicted()) failure = "reserve used on a predicted step";
          for (std::size_t g = 0; g < budget_before.size(); ++g) {
            if (policy.group_budget()[g] < 0) failure = "negative group budget";
          }
        }
      }
      if (!a.complete() || !check_integral_feasibility(inst, a)) failure = "capacity violation";
      ++triples;
    }
  }
  out.pass = failure.empty() && triples == 500;
  out.detail = std::to_string(triples) + " triples (" + std::to_string(cbp_runs) + " CBP)";
  if (!failure.empty()) out.detail += ", first failure: " + failure;
  return out;
}

Outcome subgradient_vs_lp() {
  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  Outcome out;
  for (RuleKind kind : kRules) {
    const FairnessRule rule = builtin_rule(kind);
    const auto samples = draw_saa_samples(s.instance, rule, s.distribution, 32, 601);
    const DualSolution exact = solve_saa_lp(s.instance, samples);
    const DualSolution sub = solve_subgradient(s.instance, samples, SubgradientOptions{}, 602);
    const double gap = std::abs(sub.objective - exact.objective);
    if (gap > 1e-2) out.pass = false;
    out.detail += std::string(to_string(kind)) + ": lp=" + fmt("%.5f", exact.objective) +
                  " sub=" + fmt("%.5f", sub.objective) + " gap=" + fmt("%.1e", gap) + "; ";
  }
  return out;
}

Outcome directional_fairness() {
  const auto start = Clock::now();
  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  const FairnessRule rule = builtin_rule(RuleKind::Maxmin);
  const std::vector<PolicyKind> kinds{PolicyKind::Bp, PolicyKind::Abp, PolicyKind::Cbp};
  PreparationOptions opts;
  const Preparation prep = prepare(s.instance, s.distribution, rule, kinds, opts, 701);
  ExperimentSpec spec{s.instance, s.distribution, rule, {}, prep.statistics.expected,
                      prep.offline_fair_expectation, 50, 702};
  for (PolicyKind k : kinds) spec.policies.push_back(make_policy_config(k, prep));
  const ExperimentResult res = run_experiment(spec);
  const auto& bp = res.summaries[0];
  const auto& abp = res.summaries[1];
  const auto& cbp = res.summaries[2];
  Outcome out;
  out.pass = abp.max_ufr.mean <= bp.max_ufr.mean && cbp.max_ufr.mean <= bp.max_ufr.mean &&
             abp.global_average.mean >= 0.93 * bp.global_average.mean;
  const double secs = seconds_since(start);
  if (secs >= 120.0) out.pass = false;
  out.detail = "maxUFR bp=" + fmt("%.4f", bp.max_ufr.mean) + " abp=" + fmt("%.4f", abp.max_ufr.mean) +
               " cbp=" + fmt("%.4f", cbp.max_ufr.mean) + "; avg bp=" + fmt("%.4f", bp.global_average.mean) +
               " abp=" + fmt("%.4f", abp.global_average.mean) + " cbp=" + fmt("%.4f", cbp.global_average.mean) +
               " (abp/bp=" + fmt("%.4f", abp.global_average.mean / bp.global_average.mean) +
               ", offline_fair/bp=" + fmt("%.4f", prep.offline_fair_expectation / bp.global_average.mean) + "); lambda=(" +
               fmt("%.4f", prep.duals.lambda[0]) + "," + fmt("%.4f", prep.duals.lambda[1]) + "), " +
               fmt("%.1f s", secs);
  return out;
}

Outcome hard_instance() {
  const Scenario s = generate_hard_instance(1);
  const FairnessRule rule = *s.rule;
  const std::vector<PolicyKind> kinds{PolicyKind::Rand, PolicyKind::Greedy, PolicyKind::Bp, PolicyKind::Abp,
                                      PolicyKind::Cbp};
  PreparationOptions opts;
  opts.offline_fair_samples = 0;
  const Preparation prep = prepare(s.instance, s.distribution, rule, kinds, opts, 801);
  ExperimentSpec spec{s.instance, s.distribution, rule, {}, prep.statistics.expected, 0.0, 500, 802};
  spec.check_feasibility = true;
  for (PolicyKind k : kinds) spec.policies.push_back(make_policy_config(k, prep));
  Outcome out;
  ExperimentResult res;
  try {
    res = run_experiment(spec);
  } catch (const RequirementInfeasible& e) {
    out.pass = false;
    out.detail = e.what();
    return out;
  }
  std::size_t feasible = 0;
  for (const auto& b : res.benchmarks) feasible += b.feasible ? 1 : 0;
  out.pass = feasible == res.benchmarks.size() && res.benchmarks.size() == 500;
  out.detail = std::to_string(feasible) + "/" + std::to_string(res.benchmarks.size()) +
               " paths ex-post feasible; violation >= 0.02 frequency:";
  for (const auto& config : spec.policies) {
    int violations = 0;
    int total = 0;
    for (const auto& row : res.rows) {
      if (row.policy != config.label()) continue;
      ++total;
      bool v = false;
      for (std::size_t g = 0; g < row.alpha.size(); ++g) v = v || row.requirement[g] - row.alpha[g] >= 0.02;
      violations += v ? 1 : 0;
    }
    out.detail += " " + config.label() + "=" + fmt("%.3f", static_cast<double>(violations) / total);
  }
  return out;
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "fairalloc-acceptance-determinism";
  std::filesystem::remove_all(root);
  const std::string config = (root / "config.json").string();
  std::filesystem::create_directories(root);
  cli::write_file(config,
                  "{\"scenario\": \"fig1-stochastic\", \"rule\": \"maxmin\", "
                  "\"policies\": [\"rand\", \"greedy\", \"bp\", \"abp\", \"cbp\"], "
                  "\"paths\": 20, \"seed\": 2024}\n");
  std::vector<std::string> files;
  Outcome out;
  for (const char* run : {"first", "second"}) {
    const std::string dir = (root / run).string();
    std::ostringstream sink, err;
    const int code = cli::run({"simulate", "--config", config, "--out", dir}, sink, err);
    if (code != 0) {
      out.pass = false;
      out.detail = std::string("simulate exited with ") + std::to_string(code) + ": " + err.str();
      return out;
    }
    files.push_back(cli::read_file((std::filesystem::path(dir) / "results.csv").string()));
  }
  out.pass = files[0] == files[1] && !files[0].empty();
  out.detail = std::to_string(files[0].size()) + " bytes, " + (out.pass ? "identical" : "different");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "fig1 fixture suite", fig1_suite},
      {2, "brute-force oracle equivalence", brute_force_equivalence},
      {3, "dual upper bound", dual_upper_bound},
      {4, "KKT capacity check", kkt_capacity},
      {5, "policy feasibility invariants", policy_invariants},
      {6, "subgradient vs LP", subgradient_vs_lp},
      {7, "directional fairness", directional_fairness},
      {8, "hard-instance behaviour", hard_instance},
      {9, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %d %s: %s -- %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
