// Serial reference vs OpenMP kernels on the fig1-stochastic scenario.
// Usage: bench [paths] [rule_samples]
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "fairalloc/harness.hpp"

using namespace fairalloc;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t paths = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  const std::size_t rule_samples = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 400;
  std::printf("threads: %d\n", omp_get_max_threads());

  const Scenario s = fig1_scenario(kFig1StochasticJitter);
  const FairnessRule rule = builtin_rule(RuleKind::Maxmin);

  RuleStatistics a, b;
  const double st_serial =
      best_of(3, [&] { a = estimate_rule_statistics_serial(s.instance, rule, s.distribution, rule_samples, 1); });
  const double st_parallel =
      best_of(3, [&] { b = estimate_rule_statistics(s.instance, rule, s.distribution, rule_samples, 1); });
  report("estimate_rule_statistics", st_serial, st_parallel, a.expected == b.expected && a.epsilon == b.epsilon);

  const std::vector<PolicyKind> kinds{PolicyKind::Rand, PolicyKind::Greedy, PolicyKind::Bp, PolicyKind::Abp,
                                      PolicyKind::Cbp};
  const Preparation prep = prepare(s.instance, s.distribution, rule, kinds, PreparationOptions{}, 2);
  ExperimentSpec spec{s.instance, s.distribution, rule, {}, prep.statistics.expected,
                      prep.offline_fair_expectation, paths, 3, false, {}};
  for (PolicyKind k : kinds) spec.policies.push_back(make_policy_config(k, prep));

  ExperimentResult x, y;
  const double ex_serial = best_of(3, [&] { x = run_experiment_serial(spec); });
  const double ex_parallel = best_of(3, [&] { y = run_experiment(spec); });
  bool same = x.rows.size() == y.rows.size();
  for (std::size_t i = 0; same && i < x.rows.size(); ++i) {
    same = x.rows[i].global_average == y.rows[i].global_average && x.rows[i].alpha == y.rows[i].alpha &&
           x.rows[i].offline_fair == y.rows[i].offline_fair;
  }
  report("run_experiment", ex_serial, ex_parallel, same);
  return same ? 0 : 1;
}
