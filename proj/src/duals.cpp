#include "fairalloc/duals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairalloc/errors.hpp"
#include "json.hpp"
#include "parallel.hpp"

namespace fairalloc {

namespace {

using nlohmann::json;

void check_multipliers(const Instance& instance, const std::vector<double>& mu,
                       const std::vector<double>& lambda) {
  if (mu.size() != instance.num_locations()) throw ShapeError("mu needs one entry per location");
  if (lambda.size() != instance.num_groups()) throw ShapeError("lambda needs one entry per group");
  for (double v : mu) {
    if (!(v >= 0.0)) throw ArgumentError("mu must be >= 0");
  }
  for (double v : lambda) {
    if (!(v >= 0.0)) throw ArgumentError("lambda must be >= 0");
  }
}

std::size_t amplified_argmax(const Case& c, const std::vector<double>& mu, double amplifier) {
  std::size_t best = 0;
  double best_value = amplifier * c.scores[0] - mu[0];
  for (std::size_t j = 1; j < c.scores.size(); ++j) {
    const double v = amplifier * c.scores[j] - mu[j];
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

// Weighted requirement totals B_g = sum_k O^k_g N^k(g,T) over all samples.
std::vector<double> requirement_totals(const Instance& instance, const std::vector<SaaSample>& samples) {
  std::vector<double> b(instance.num_groups(), 0.0);
  for (const auto& s : samples) {
    for (std::size_t g = 0; g < b.size(); ++g) {
      b[g] += s.requirements.values[g] * static_cast<double>(s.requirements.counts[g]);
    }
  }
  return b;
}

void check_samples(const Instance& instance, const std::vector<SaaSample>& samples) {
  if (samples.empty()) throw ArgumentError("the sample-average problem needs K >= 1");
  for (const auto& s : samples) {
    validate_path(instance, s.path);
    if (s.requirements.values.size() != instance.num_groups() ||
        s.requirements.counts.size() != instance.num_groups()) {
      throw ShapeError("sample requirements do not match the group count");
    }
  }
}

// min over mu of the (unnormalized) sample-average Lagrangian at fixed lambda.
struct InnerResult {
  double value = 0.0;              // per case
  std::vector<double> gradient;    // d/d lambda, per case
  std::vector<double> mu;
};

class InnerProblem {
 public:
  InnerProblem(const Instance& instance, const std::vector<SaaSample>& samples)
      : samples_(samples), totals_(requirement_totals(instance, samples)) {
    const std::size_t m = instance.num_locations();
    problem_.cols = m;
    for (const auto& s : samples) {
      problem_.rows += s.path.size();
    }
    problem_.weights.resize(problem_.rows * m);
    for (std::size_t j = 0; j < m; ++j) {
      problem_.capacities.push_back(static_cast<double>(samples.size()) *
                                    static_cast<double>(instance.capacity(j)));
    }
    scale_ = 1.0 / static_cast<double>(problem_.rows);
  }

  InnerResult evaluate(const std::vector<double>& lambda) {
    const std::size_t m = problem_.cols;
    std::size_t row = 0;
    for (const auto& s : samples_) {
      for (const Case& c : s.path.cases) {
        const double a = 1.0 + lambda[static_cast<std::size_t>(c.group)];
        for (std::size_t j = 0; j < m; ++j) problem_.weights[row * m + j] = a * c.scores[j];
        ++row;
      }
    }
    const lp::TransportationSolution sol = lp::solve_transportation(problem_);

    InnerResult out;
    out.mu = sol.column_prices;
    out.gradient.assign(lambda.size(), 0.0);
    row = 0;
    for (const auto& s : samples_) {
      for (const Case& c : s.path.cases) {
        for (std::size_t j = 0; j < m; ++j) {
          if (sol.assignment(row, j) > 0.5) out.gradient[static_cast<std::size_t>(c.group)] += c.scores[j];
        }
        ++row;
      }
    }
    out.value = sol.value;
    for (std::size_t g = 0; g < lambda.size(); ++g) {
      out.gradient[g] -= totals_[g];
      out.value -= lambda[g] * totals_[g];
      out.gradient[g] *= scale_;
    }
    out.value *= scale_;
    return out;
  }

 private:
  const std::vector<SaaSample>& samples_;
  std::vector<double> totals_;
  lp::TransportationProblem problem_;
  double scale_ = 1.0;
};

struct Cut {
  std::vector<double> point;
  double value;
  std::vector<double> gradient;
};

// Kelley master: min theta s.t. theta >= value_i + g_i (lambda - point_i), 0 <= lambda <= bound.
std::pair<std::vector<double>, double> solve_master(const std::vector<Cut>& cuts, std::size_t groups,
                                                    double bound) {
  lp::LinearProgram master;
  master.sense = lp::Sense::Minimize;
  for (std::size_t g = 0; g < groups; ++g) master.add_variable(0.0, 0.0, bound);
  const std::size_t theta = master.add_variable(1.0, -lp::kInfinity, lp::kInfinity);
  for (const Cut& c : cuts) {
    std::vector<lp::Term> terms{{theta, 1.0}};
    double rhs = c.value;
    for (std::size_t g = 0; g < groups; ++g) {
      terms.push_back({g, -c.gradient[g]});
      rhs -= c.gradient[g] * c.point[g];
    }
    master.add_constraint(std::move(terms), lp::Relation::GreaterEqual, rhs);
  }
  const auto sol = lp::solve_lp(master);
  if (sol.status != lp::LpStatus::Optimal) {
    throw SolverError(std::string("cutting-plane master is ") + lp::to_string(sol.status));
  }
  return {std::vector<double>(sol.primal.begin(), sol.primal.begin() + static_cast<std::ptrdiff_t>(groups)),
          sol.objective};
}

// min sum lambda s.t. every cut stays <= level, 0 <= lambda <= bound.
std::vector<double> least_lambda(const std::vector<Cut>& cuts, std::size_t groups, double bound,
                                 double level) {
  lp::LinearProgram program;
  program.sense = lp::Sense::Minimize;
  for (std::size_t g = 0; g < groups; ++g) program.add_variable(1.0, 0.0, bound);
  for (const Cut& c : cuts) {
    std::vector<lp::Term> terms;
    double rhs = level - c.value;
    for (std::size_t g = 0; g < groups; ++g) {
      terms.push_back({g, c.gradient[g]});
      rhs += c.gradient[g] * c.point[g];
    }
    program.add_constraint(std::move(terms), lp::Relation::LessEqual, rhs);
  }
  const auto sol = lp::solve_lp(program);
  if (sol.status != lp::LpStatus::Optimal) {
    throw SolverError(std::string("least-lambda program is ") + lp::to_string(sol.status));
  }
  return sol.primal;
}

std::vector<double> lagrangian_gradient(const Instance& instance, const SaaSample& sample,
                                        const std::vector<double>& mu, const std::vector<double>& lambda,
                                        std::vector<double>& grad_lambda) {
  const std::size_t m = instance.num_locations();
  const double inv_t = 1.0 / static_cast<double>(instance.horizon());
  std::vector<double> grad_mu(m);
  for (std::size_t j = 0; j < m; ++j) grad_mu[j] = instance.fractional_capacity(j);
  grad_lambda.assign(instance.num_groups(), 0.0);
  for (const Case& c : sample.path.cases) {
    const auto g = static_cast<std::size_t>(c.group);
    const std::size_t j = amplified_argmax(c, mu, 1.0 + lambda[g]);
    grad_mu[j] -= inv_t;
    grad_lambda[g] += c.scores[j] * inv_t;
  }
  for (std::size_t g = 0; g < grad_lambda.size(); ++g) {
    grad_lambda[g] -= sample.requirements.values[g] * static_cast<double>(sample.requirements.counts[g]) * inv_t;
  }
  return grad_mu;
}

struct Iterate {
  std::vector<double> mu;
  std::vector<double> lambda;
};

// Shared descent loop; batch(k) returns the samples for iteration k.
template <class BatchFn>
Iterate run_descent(const Instance& instance, const SubgradientOptions& options, BatchFn&& batch) {
  if (options.iterations == 0) throw ArgumentError("subgradient needs at least one iteration");
  const std::size_t m = instance.num_locations();
  const std::size_t g_count = instance.num_groups();
  Iterate x{options.initial_mu.value_or(std::vector<double>(m, 0.0)),
            options.initial_lambda.value_or(std::vector<double>(g_count, 0.0))};
  check_multipliers(instance, x.mu, x.lambda);
  Iterate avg{std::vector<double>(m, 0.0), std::vector<double>(g_count, 0.0)};
  const std::size_t start = options.iterations / 2;

  for (std::size_t k = 0; k < options.iterations; ++k) {
    const std::vector<SaaSample> samples = batch(k);
    std::vector<std::vector<double>> gm(samples.size());
    std::vector<std::vector<double>> gl(samples.size());
    detail::parallel_for(samples.size(), [&](std::size_t b) {
      gm[b] = lagrangian_gradient(instance, samples[b], x.mu, x.lambda, gl[b]);
    });
    const double eta = options.step_scale / std::sqrt(static_cast<double>(k + 1));
    const double inv_b = 1.0 / static_cast<double>(samples.size());
    for (std::size_t j = 0; j < m; ++j) {
      double d = 0.0;
      for (const auto& v : gm) d += v[j];
      x.mu[j] = std::max(0.0, x.mu[j] - eta * d * inv_b);
    }
    for (std::size_t g = 0; g < g_count; ++g) {
      double d = 0.0;
      for (const auto& v : gl) d += v[g];
      x.lambda[g] = std::max(0.0, x.lambda[g] - eta * d * inv_b);
    }
    if (k >= start) {
      for (std::size_t j = 0; j < m; ++j) avg.mu[j] += x.mu[j];
      for (std::size_t g = 0; g < g_count; ++g) avg.lambda[g] += x.lambda[g];
    }
  }
  const double n = static_cast<double>(options.iterations - start);
  for (double& v : avg.mu) v /= n;
  for (double& v : avg.lambda) v /= n;
  return avg;
}

}  // namespace

const char* to_string(DualMethod method) {
  return method == DualMethod::SaaLp ? "saa-lp" : "subgradient";
}

DualMethod parse_dual_method(const std::string& name) {
  if (name == "lp" || name == "saa-lp") return DualMethod::SaaLp;
  if (name == "subgradient") return DualMethod::Subgradient;
  throw ConfigError("unknown dual method '" + name + "'");
}

std::string dual_solution_to_json(const DualSolution& duals) {
  json doc;
  doc["mu"] = duals.mu;
  doc["lambda"] = duals.lambda;
  doc["objective"] = duals.objective;
  doc["method"] = to_string(duals.method);
  doc["K"] = duals.samples;
  doc["seed"] = duals.seed;
  return doc.dump(2) + "\n";
}

DualSolution dual_solution_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    DualSolution out;
    out.mu = doc.at("mu").get<std::vector<double>>();
    out.lambda = doc.at("lambda").get<std::vector<double>>();
    out.objective = doc.at("objective").get<double>();
    out.method = parse_dual_method(doc.at("method").get<std::string>());
    out.samples = doc.at("K").get<std::size_t>();
    out.seed = doc.at("seed").get<std::uint64_t>();
    for (double v : out.mu) {
      if (!(v >= 0.0)) throw DataError("dual file has a negative mu");
    }
    for (double v : out.lambda) {
      if (!(v >= 0.0)) throw DataError("dual file has a negative lambda");
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dual solution: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed dual solution: ") + e.what());
  }
}

std::vector<SaaSample> saa_samples_from_paths(const Instance& instance, const FairnessRule& rule,
                                              const std::vector<SamplePath>& paths) {
  std::vector<SaaSample> out(paths.size());
  detail::parallel_for(paths.size(), [&](std::size_t k) {
    out[k].path = paths[k];
    out[k].requirements = rule(instance, paths[k]);
  });
  return out;
}

std::vector<SaaSample> draw_saa_samples(const Instance& instance, const FairnessRule& rule,
                                        const ArrivalDistribution& distribution, std::size_t samples,
                                        std::uint64_t seed) {
  if (samples == 0) throw ArgumentError("the sample-average problem needs K >= 1");
  std::vector<SaaSample> out(samples);
  detail::parallel_for(samples, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k, "saa"));
    out[k].path = distribution.sample_path(instance.horizon(), rng);
    out[k].requirements = rule(instance, out[k].path);
  });
  return out;
}

double lagrangian_value(const Instance& instance, const SamplePath& path,
                        const RequirementVector& requirements, const std::vector<double>& mu,
                        const std::vector<double>& lambda) {
  check_multipliers(instance, mu, lambda);
  if (requirements.values.size() != instance.num_groups()) {
    throw ShapeError("requirements need one entry per group");
  }
  double total = 0.0;
  for (const Case& c : path.cases) {
    const double a = 1.0 + lambda[static_cast<std::size_t>(c.group)];
    const std::size_t j = amplified_argmax(c, mu, a);
    total += a * c.scores[j] - mu[j];
  }
  for (std::size_t j = 0; j < mu.size(); ++j) total += mu[j] * static_cast<double>(instance.capacity(j));
  const auto counts = group_counts(path, instance.num_groups(), static_cast<long>(path.size()));
  for (std::size_t g = 0; g < lambda.size(); ++g) {
    total -= lambda[g] * requirements.values[g] * static_cast<double>(counts[g]);
  }
  return total / static_cast<double>(instance.horizon());
}

double saa_objective(const Instance& instance, const std::vector<SaaSample>& samples,
                     const std::vector<double>& mu, const std::vector<double>& lambda) {
  if (samples.empty()) throw ArgumentError("saa_objective needs at least one sample");
  double total = 0.0;
  for (const auto& s : samples) total += lagrangian_value(instance, s.path, s.requirements, mu, lambda);
  return total / static_cast<double>(samples.size());
}

DualSolution solve_saa_lp(const Instance& instance, const std::vector<SaaSample>& samples,
                          const SaaOptions& options) {
  check_samples(instance, samples);
  const std::size_t g_count = instance.num_groups();
  InnerProblem inner(instance, samples);

  std::vector<Cut> cuts;
  auto add_cut = [&](const std::vector<double>& lambda) {
    InnerResult r = inner.evaluate(lambda);
    cuts.push_back({lambda, r.value, r.gradient});
    return r;
  };

  std::vector<double> best_lambda(g_count, 0.0);
  InnerResult best = add_cut(best_lambda);
  double bound = options.initial_lambda_bound;

  std::vector<double> chosen;
  InnerResult chosen_result;
  while (true) {
    // Phase 1: cutting planes until the model gap closes inside the box.
    double gap_tol = 0.0;
    while (true) {
      if (cuts.size() > options.max_cuts) throw SolverStall("sample-average cutting planes did not converge");
      auto [lambda, lower] = solve_master(cuts, g_count, bound);
      gap_tol = options.tolerance * std::max(1.0, std::abs(best.value));
      if (best.value - lower <= gap_tol) break;
      InnerResult r = add_cut(lambda);
      if (r.value < best.value) {
        best = r;
        best_lambda = lambda;
      }
    }
    // Phase 2: least-L1 lambda whose true value is within tolerance of the best.
    chosen = best_lambda;
    chosen_result = best;
    while (true) {
      if (cuts.size() > options.max_cuts) throw SolverStall("sample-average cutting planes did not converge");
      std::vector<double> lambda = least_lambda(cuts, g_count, bound, best.value + gap_tol);
      InnerResult r = add_cut(lambda);
      if (r.value < best.value) {
        best = r;
        best_lambda = lambda;
      }
      if (r.value <= best.value + 2.0 * gap_tol) {
        chosen = lambda;
        chosen_result = r;
        break;
      }
    }
    const bool at_bound = std::any_of(chosen.begin(), chosen.end(),
                                      [&](double v) { return v >= bound * (1.0 - 1e-9); });
    if (!at_bound) break;
    if (bound >= options.max_lambda_bound) {
      throw RequirementInfeasible("amplifiers diverge: the sampled requirements cannot be met");
    }
    bound = std::min(bound * 10.0, options.max_lambda_bound);
  }

  DualSolution out;
  out.lambda = chosen;
  out.mu = chosen_result.mu;
  for (double& v : out.mu) v = std::max(0.0, v);
  out.objective = saa_objective(instance, samples, out.mu, out.lambda);
  out.method = DualMethod::SaaLp;
  out.samples = samples.size();
  return out;
}

lp::LinearProgram saa_linear_program(const Instance& instance, const std::vector<SaaSample>& samples) {
  check_samples(instance, samples);
  const std::size_t m = instance.num_locations();
  const std::size_t g_count = instance.num_groups();
  const auto k = static_cast<double>(samples.size());
  const std::vector<double> totals = requirement_totals(instance, samples);

  lp::LinearProgram program;
  program.sense = lp::Sense::Minimize;
  for (std::size_t j = 0; j < m; ++j) program.add_variable(k * static_cast<double>(instance.capacity(j)));
  for (std::size_t g = 0; g < g_count; ++g) program.add_variable(-totals[g]);
  for (const auto& s : samples) {
    for (const Case& c : s.path.cases) {
      const std::size_t z = program.add_variable(1.0, -lp::kInfinity, lp::kInfinity);
      for (std::size_t j = 0; j < m; ++j) {
        // z + mu_j - w_tj lambda_g >= w_tj
        program.add_constraint({{z, 1.0}, {j, 1.0}, {m + static_cast<std::size_t>(c.group), -c.scores[j]}},
                               lp::Relation::GreaterEqual, c.scores[j]);
      }
    }
  }
  return program;
}

DualSolution solve_bp_duals(const Instance& instance, const std::vector<SaaSample>& samples) {
  check_samples(instance, samples);
  std::vector<SaaSample> zeroed = samples;
  for (auto& s : zeroed) std::fill(s.requirements.values.begin(), s.requirements.values.end(), 0.0);
  const std::vector<double> lambda(instance.num_groups(), 0.0);
  InnerProblem inner(instance, zeroed);
  DualSolution out;
  out.mu = inner.evaluate(lambda).mu;
  for (double& v : out.mu) v = std::max(0.0, v);
  out.lambda = lambda;
  out.objective = saa_objective(instance, zeroed, out.mu, out.lambda);
  out.method = DualMethod::SaaLp;
  out.samples = samples.size();
  return out;
}

DualSolution solve_subgradient(const Instance& instance, const FairnessRule& rule,
                               const ArrivalDistribution& distribution,
                               const SubgradientOptions& options, std::uint64_t seed) {
  const std::size_t batch_size = std::max<std::size_t>(1, options.minibatch);
  const Iterate x = run_descent(instance, options, [&](std::size_t k) {
    std::vector<SaaSample> batch(batch_size);
    detail::parallel_for(batch_size, [&](std::size_t b) {
      Rng rng(derive_seed(seed, k * batch_size + b, "subgradient"));
      batch[b].path = distribution.sample_path(instance.horizon(), rng);
      batch[b].requirements = rule(instance, batch[b].path);
    });
    return batch;
  });
  const auto eval = draw_saa_samples(instance, rule, distribution, std::max<std::size_t>(1, options.eval_samples),
                                     derive_seed(seed, 0, "subgradient-eval"));
  DualSolution out;
  out.mu = x.mu;
  out.lambda = x.lambda;
  out.objective = saa_objective(instance, eval, out.mu, out.lambda);
  out.method = DualMethod::Subgradient;
  out.samples = options.iterations * batch_size;
  out.seed = seed;
  return out;
}

DualSolution solve_subgradient(const Instance& instance, const std::vector<SaaSample>& samples,
                               const SubgradientOptions& options, std::uint64_t seed) {
  check_samples(instance, samples);
  const std::size_t batch_size = std::clamp<std::size_t>(options.minibatch, 1, samples.size());
  Rng rng(derive_seed(seed, 0, "subgradient-frozen"));
  const Iterate x = run_descent(instance, options, [&](std::size_t) {
    if (batch_size == samples.size()) return samples;
    std::vector<SaaSample> batch;
    batch.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) batch.push_back(samples[rng.below(samples.size())]);
    return batch;
  });
  DualSolution out;
  out.mu = x.mu;
  out.lambda = x.lambda;
  out.objective = saa_objective(instance, samples, out.mu, out.lambda);
  out.method = DualMethod::Subgradient;
  out.samples = samples.size();
  out.seed = seed;
  return out;
}

}  // namespace fairalloc
