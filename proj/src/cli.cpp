#include "fairalloc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairalloc/duals.hpp"
#include "fairalloc/errors.hpp"
#include "fairalloc/fairness.hpp"
#include "fairalloc/harness.hpp"
#include "fairalloc/policies.hpp"
#include "fairalloc/sampling.hpp"

namespace fairalloc::cli {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kLpSizeLimit = 100000;
constexpr double kPlotFloor = -0.1;

const std::vector<std::string> kResultColumns{"path_id",  "rule",          "policy",  "global_avg",
                                              "opt",      "offline_fair",  "efficiency", "global_regret",
                                              "max_ufr",  "median_ufr",    "depletion_index"};
const std::vector<std::string> kGroupPrefixes{"alpha_", "O_", "ufr_", "regret_", "greedy_"};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw DataError(where + ": '" + text + "' is not a number");
  }
  return v;
}

void check_identifier(const std::string& id, const std::string& what) {
  if (id.empty() || id.find_first_of(",\"\n\r") != std::string::npos) {
    throw DataError(what + " '" + id + "' must be non-empty without commas, quotes or newlines");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

// ---------------------------------------------------------------------------
// Problem sources shared by duals and simulate.

struct SourceArgs {
  std::string instance;
  std::string cases;
  std::string scenario;
  long k = 1;
  long t = 100;
  std::size_t m = 2;
  std::size_t g = 2;
};

void add_source_options(CLI::App* cmd, SourceArgs& a) {
  cmd->add_option("--instance", a.instance, "instance.json");
  cmd->add_option("--cases", a.cases, "cases.csv used as the empirical pool");
  cmd->add_option("--scenario", a.scenario, "built-in scenario: fig1, fig1-stochastic, hard-c1, uniform");
  cmd->add_option("--k", a.k, "hard-c1 scale");
  cmd->add_option("--t", a.t, "uniform horizon");
  cmd->add_option("--m", a.m, "uniform locations");
  cmd->add_option("--g", a.g, "uniform groups");
}

Scenario make_scenario(const SourceArgs& a) {
  if (a.scenario == "fig1") return fig1_scenario();
  if (a.scenario == "fig1-stochastic") return fig1_scenario(kFig1StochasticJitter);
  if (a.scenario == "hard-c1") return generate_hard_instance(a.k);
  if (a.scenario == "uniform") return uniform_scenario(a.t, a.m, a.g);
  throw ArgumentError("unknown scenario '" + a.scenario + "'");
}

struct Source {
  Scenario scenario;
  std::optional<SamplePath> pool;  // the concrete cases, when there are some
};

Source load_source(const SourceArgs& a) {
  Source s;
  if (!a.scenario.empty()) {
    if (!a.instance.empty() || !a.cases.empty()) {
      throw ArgumentError("--scenario cannot be combined with --instance or --cases");
    }
    s.scenario = make_scenario(a);
    if (a.scenario == "fig1") s.pool = fig1_fixed_path();
    return s;
  }
  if (a.instance.empty() || a.cases.empty()) {
    throw ArgumentError("give either --scenario or both --instance and --cases");
  }
  s.scenario.name = "pool";
  s.scenario.instance = read_instance(a.instance);
  CaseTable table = read_cases(s.scenario.instance, a.cases);
  if (table.path.cases.empty()) throw DataError(a.cases + " has no cases");
  s.scenario.distribution = ArrivalDistribution::empirical(table.path.cases, s.scenario.instance.num_groups());
  s.pool = std::move(table.path);
  return s;
}

FairnessRule resolve_rule(const std::string& name, const Scenario& scenario) {
  if (name.empty()) {
    if (scenario.rule) return *scenario.rule;
    throw ConfigError("--rule is required for this scenario");
  }
  if (name == "hard-c1") {
    if (scenario.instance.num_groups() != 2) throw ConfigError("rule hard-c1 needs exactly two groups");
    return custom_rule("hard-c1", hard_instance_rule);
  }
  return builtin_rule(parse_rule_kind(name));
}

DualMethod resolve_method(const std::string& name, std::size_t samples, long horizon) {
  if (name == "auto") {
    return samples * static_cast<std::size_t>(horizon) <= kLpSizeLimit ? DualMethod::SaaLp : DualMethod::Subgradient;
  }
  return parse_dual_method(name);
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ArgumentError("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  SourceArgs source;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.source.scenario.empty()) throw ArgumentError("gen needs --scenario");
  const Scenario s = make_scenario(a.source);
  CaseTable table;
  if (a.source.scenario == "fig1") {
    table.path = fig1_fixed_path();
  } else {
    Rng rng(derive_seed(a.seed, 0, "gen"));
    table.path = s.distribution.sample_path(s.instance.horizon(), rng);
  }
  for (std::size_t i = 0; i < table.path.size(); ++i) table.ids.push_back(std::to_string(i + 1));
  ensure_directory(a.out);
  write_file(join_path(a.out, "instance.json"), instance_to_json(s.instance));
  write_file(join_path(a.out, "cases.csv"), cases_to_csv(s.instance, table));
  out << "gen: " << s.name << ", " << table.path.size() << " cases -> " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// duals

struct DualsArgs {
  SourceArgs source;
  std::string rule;
  std::size_t samples = 64;
  std::size_t stats_samples = kDefaultRuleSamples;
  std::string method = "auto";
  std::uint64_t seed = 0;
  std::string out;
  bool frozen_path = false;
  bool bp = false;
  bool fresh = false;
  std::string psi;
  double beta = 0.1;
  SubgradientOptions subgradient;
};

int cmd_duals(const DualsArgs& a, std::ostream& out) {
  const Source src = load_source(a.source);
  const Instance& inst = src.scenario.instance;
  const FairnessRule rule = resolve_rule(a.rule, src.scenario);

  if (a.psi == "theoretical") {
    const RuleStatistics stats = estimate_rule_statistics(inst, rule, src.scenario.distribution, a.stats_samples,
                                                          derive_seed(a.seed, 0, "stats"));
    theoretical_params(a.beta, inst.num_groups(), stats.epsilon);
  } else if (!a.psi.empty() && a.psi != "data-driven") {
    throw ArgumentError("unknown --psi mode '" + a.psi + "'");
  }

  std::vector<SaaSample> samples;
  if (a.frozen_path) {
    if (!src.pool) throw ArgumentError("--frozen-path needs --cases or --scenario fig1");
    if (static_cast<long>(src.pool->size()) != inst.horizon()) {
      throw DataError("frozen path has " + std::to_string(src.pool->size()) + " cases, horizon is " +
                      std::to_string(inst.horizon()));
    }
    samples = saa_samples_from_paths(inst, rule, {*src.pool});
  } else {
    if (a.samples == 0) throw ArgumentError("--K must be positive");
    samples = draw_saa_samples(inst, rule, src.scenario.distribution, a.samples, derive_seed(a.seed, 0, "duals"));
  }

  DualSolution d;
  const DualMethod method = resolve_method(a.method, samples.size(), inst.horizon());
  if (a.bp) {
    d = solve_bp_duals(inst, samples);
  } else if (method == DualMethod::SaaLp) {
    d = solve_saa_lp(inst, samples);
  } else if (a.fresh) {
    d = solve_subgradient(inst, rule, src.scenario.distribution, a.subgradient, derive_seed(a.seed, 0, "subgradient"));
  } else {
    d = solve_subgradient(inst, samples, a.subgradient, derive_seed(a.seed, 0, "subgradient"));
  }
  d.seed = a.seed;

  const std::string text = dual_solution_to_json(d);
  if (a.out.empty()) {
    out << text;
  } else {
    write_file(a.out, text);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config;
  SourceArgs source;
  std::string replay;
  std::string rule;
  std::string policies;
  std::size_t paths = 50;
  std::size_t samples = 64;
  std::size_t stats_samples = kDefaultRuleSamples;
  std::size_t fair_samples = 50;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string duals;
  std::string method = "auto";
  std::string cbp_mode = "empirical";
  double beta = 0.1;
  bool rand_uniform = false;
  bool check_feasibility = false;
};

// Fills every field whose flag was not given on the command line.
void apply_config(const CLI::App& cmd, SimulateArgs& a) {
  if (a.config.empty()) return;
  json doc;
  try {
    doc = json::parse(read_file(a.config));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + a.config + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(a.config + " must hold a JSON object");
  static const std::vector<std::string> known{
      "instance", "cases", "scenario", "k",      "t",          "m",    "g",            "replay",
      "rule",     "policies", "paths", "K",      "stats_K",    "fair_K", "seed",       "out",
      "duals",    "method",   "cbp_mode", "beta", "rand_uniform", "check_feasibility"};
  for (const auto& item : doc.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw ConfigError("unknown config field '" + item.key() + "'");
    }
  }
  auto given = [&](const std::string& flag) { return cmd.get_option(flag)->count() > 0; };
  try {
    auto take = [&](const std::string& key, const std::string& flag, auto& field) {
      if (doc.contains(key) && !given(flag)) doc.at(key).get_to(field);
    };
    take("instance", "--instance", a.source.instance);
    take("cases", "--cases", a.source.cases);
    take("scenario", "--scenario", a.source.scenario);
    take("k", "--k", a.source.k);
    take("t", "--t", a.source.t);
    take("m", "--m", a.source.m);
    take("g", "--g", a.source.g);
    take("replay", "--replay", a.replay);
    take("rule", "--rule", a.rule);
    take("paths", "--paths", a.paths);
    take("K", "--K", a.samples);
    take("stats_K", "--stats-K", a.stats_samples);
    take("fair_K", "--fair-K", a.fair_samples);
    take("out", "--out", a.out);
    take("duals", "--duals", a.duals);
    take("method", "--method", a.method);
    take("cbp_mode", "--cbp-mode", a.cbp_mode);
    take("beta", "--beta", a.beta);
    take("rand_uniform", "--rand-uniform", a.rand_uniform);
    take("check_feasibility", "--check-feasibility", a.check_feasibility);
    if (doc.contains("seed") && !given("--seed")) a.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("policies") && !given("--policies")) {
      const json& p = doc.at("policies");
      if (p.is_string()) {
        a.policies = p.get<std::string>();
      } else {
        std::string joined;
        for (const auto& v : p) joined += (joined.empty() ? "" : ",") + v.get<std::string>();
        a.policies = joined;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad value in " + a.config + ": " + e.what());
  }
}

std::vector<PolicyKind> parse_policies(const std::string& list) {
  std::vector<PolicyKind> kinds;
  for (const auto& item : split(list, ',')) {
    const std::string name = trim(item);
    if (name.empty()) continue;
    kinds.push_back(parse_policy_kind(name));
  }
  return kinds;
}

std::string results_csv(const Instance& inst, const std::string& rule, const ExperimentResult& res) {
  std::string s;
  for (std::size_t c = 0; c < kResultColumns.size(); ++c) s += (c ? "," : "") + kResultColumns[c];
  for (const auto& g : inst.groups()) {
    for (const auto& prefix : kGroupPrefixes) s += "," + prefix + g;
  }
  s += "\n";
  for (const auto& row : res.rows) {
    s += std::to_string(row.path_id) + "," + rule + "," + row.policy;
    for (double v : {row.global_average, row.opt, row.offline_fair, row.metrics.efficiency,
                     row.metrics.global_regret, row.metrics.max_ufr, row.metrics.median_positive_ufr}) {
      s += "," + format_number(v);
    }
    s += "," + std::to_string(row.depletion_index);
    for (std::size_t g = 0; g < inst.num_groups(); ++g) {
      const long greedy = g < row.greedy_steps.size() ? row.greedy_steps[g] : 0;
      s += "," + format_number(row.alpha[g]) + "," + format_number(row.requirement[g]) + "," +
           format_number(row.metrics.ufr[g]) + "," + format_number(row.metrics.g_regret[g]) + "," +
           std::to_string(greedy);
    }
    s += "\n";
  }
  return s;
}

json estimate_json(const Estimate& e) { return json{{"mean", e.mean}, {"se", e.se}}; }

std::string summary_json(const SimulateArgs& a, const Scenario& scenario, const FairnessRule& rule,
                         const Preparation& prep, const ExperimentResult& res) {
  json doc;
  doc["scenario"] = scenario.name;
  doc["rule"] = rule.name;
  doc["seed"] = *a.seed;
  doc["paths"] = res.benchmarks.size();
  doc["horizon"] = scenario.instance.horizon();
  doc["groups"] = scenario.instance.groups();
  std::size_t infeasible = 0;
  for (const auto& b : res.benchmarks) infeasible += b.feasible ? 0 : 1;
  doc["benchmarks"] = {{"opt", estimate_json(res.opt)},
                       {"offline_fair", estimate_json(res.offline_fair)},
                       {"offline_fair_expectation", prep.offline_fair_expectation},
                       {"expected_requirements", prep.statistics.expected},
                       {"epsilon", prep.statistics.epsilon},
                       {"infeasible_paths", infeasible}};
  json policies = json::array();
  for (const auto& s : res.summaries) {
    json p;
    p["policy"] = s.policy;
    p["paths"] = s.paths;
    p["global_average"] = estimate_json(s.global_average);
    p["efficiency"] = estimate_json(s.efficiency);
    p["max_ufr"] = estimate_json(s.max_ufr);
    p["median_ufr"] = estimate_json(s.median_positive_ufr);
    p["global_regret"] = estimate_json(s.global_regret);
    json groups = json::object();
    for (std::size_t g = 0; g < scenario.instance.num_groups(); ++g) {
      groups[scenario.instance.groups()[g]] = {{"ufr", estimate_json(s.ufr[g])},
                                               {"regret", estimate_json(s.g_regret[g])}};
    }
    p["groups"] = groups;
    policies.push_back(p);
  }
  doc["policies"] = policies;
  return doc.dump(2) + "\n";
}

int cmd_simulate(const CLI::App& cmd, SimulateArgs a, std::ostream& out) {
  apply_config(cmd, a);
  if (!a.seed) throw ConfigError("simulate needs --seed or a seed in the config");
  const Source src = load_source(a.source);
  const Instance& inst = src.scenario.instance;
  const FairnessRule rule = resolve_rule(a.rule, src.scenario);
  const std::vector<PolicyKind> kinds = parse_policies(a.policies);

  std::vector<SamplePath> replay;
  if (!a.replay.empty()) {
    CaseTable table = read_cases(inst, a.replay);
    if (static_cast<long>(table.path.size()) != inst.horizon()) {
      throw DataError(a.replay + " has " + std::to_string(table.path.size()) + " cases, horizon is " +
                      std::to_string(inst.horizon()));
    }
    replay.push_back(std::move(table.path));
  }

  if (a.cbp_mode != "empirical" && a.cbp_mode != "theoretical") {
    throw ConfigError("unknown --cbp-mode '" + a.cbp_mode + "'");
  }
  PreparationOptions opts;
  opts.rule_samples = a.stats_samples;
  opts.dual_samples = a.samples;
  opts.dual_method = resolve_method(a.method, a.samples, inst.horizon());
  opts.theoretical_cbp = a.cbp_mode == "theoretical";
  opts.beta = a.beta;
  opts.offline_fair_samples = a.fair_samples;
  Preparation prep = prepare(inst, src.scenario.distribution, rule, kinds, opts, *a.seed);
  if (!a.duals.empty()) {
    DualSolution d = dual_solution_from_json(read_file(a.duals));
    if (d.mu.size() != inst.num_locations() || d.lambda.size() != inst.num_groups()) {
      throw DataError(a.duals + " does not match the instance dimensions");
    }
    prep.duals = std::move(d);
  }

  const std::size_t n_paths = replay.empty() ? a.paths : 0;
  ExperimentSpec spec{inst,    src.scenario.distribution, rule, {}, prep.statistics.expected,
                      prep.offline_fair_expectation, n_paths, *a.seed, a.check_feasibility, std::move(replay)};
  for (PolicyKind k : kinds) {
    PolicyConfig c = make_policy_config(k, prep);
    c.rand_uniform = a.rand_uniform;
    spec.policies.push_back(std::move(c));
  }
  const ExperimentResult res = run_experiment(spec);

  ensure_directory(a.out);
  write_file(join_path(a.out, "results.csv"), results_csv(inst, rule.name, res));
  write_file(join_path(a.out, "summary.json"), summary_json(a, src.scenario, rule, prep, res));
  out << "simulate: " << res.rows.size() << " rows over " << res.benchmarks.size() << " paths -> " << a.out
      << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportRow {
  std::string source;  // file index and path id, identifies a path
  std::string rule;
  std::string policy;
  double efficiency = 0.0;
  double fair_ratio = 1.0;
  double max_ufr = 0.0;
  double median_ufr = 0.0;
  std::string path_id;
  std::vector<std::pair<std::string, double>> group_ufr;
};

std::vector<ReportRow> read_results(const std::string& file, std::size_t index) {
  const auto lines = lines_of(read_file(file));
  if (lines.empty()) throw ArgumentError(file + " is empty");
  const auto header = split(lines[0], ',');
  const std::size_t fixed = kResultColumns.size();
  const std::size_t per_group = kGroupPrefixes.size();
  if (header.size() < fixed || (header.size() - fixed) % per_group != 0 ||
      !std::equal(kResultColumns.begin(), kResultColumns.end(), header.begin())) {
    throw ArgumentError(file + ": header does not match the results schema");
  }
  std::vector<std::string> groups;
  for (std::size_t c = fixed; c < header.size(); c += per_group) {
    const std::string& first = header[c];
    if (first.rfind(kGroupPrefixes[0], 0) != 0) throw ArgumentError(file + ": unexpected column " + first);
    const std::string group = first.substr(kGroupPrefixes[0].size());
    for (std::size_t k = 0; k < per_group; ++k) {
      if (header[c + k] != kGroupPrefixes[k] + group) {
        throw ArgumentError(file + ": unexpected column " + header[c + k]);
      }
    }
    groups.push_back(group);
  }
  std::vector<ReportRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split(lines[i], ',');
    const std::string where = file + " line " + std::to_string(i + 1);
    if (cells.size() != header.size()) throw ArgumentError(where + ": wrong number of columns");
    ReportRow r;
    r.path_id = cells[0];
    r.source = std::to_string(index) + ":" + cells[0];
    r.rule = cells[1];
    r.policy = cells[2];
    const double opt = parse_number(cells[4], where);
    const double fair = parse_number(cells[5], where);
    r.fair_ratio = opt > 0.0 ? fair / opt : 1.0;
    r.efficiency = parse_number(cells[6], where);
    r.max_ufr = parse_number(cells[8], where);
    r.median_ufr = parse_number(cells[9], where);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      r.group_ufr.emplace_back(groups[g], parse_number(cells[fixed + g * per_group + 2], where));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

template <class T>
void remember(std::vector<T>& order, const T& value) {
  if (std::find(order.begin(), order.end(), value) == order.end()) order.push_back(value);
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_dir, std::ostream& out) {
  if (files.empty()) throw ArgumentError("report needs at least one --results file");
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto part = read_results(files[i], i);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::vector<std::string> rules;
  std::vector<std::string> policies;
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> cells;
  std::map<Key, std::vector<const ReportRow*>> by_cell;
  std::map<std::string, std::map<std::string, double>> fair_by_rule;  // rule -> path -> ratio
  for (const auto& r : rows) {
    remember(rules, r.rule);
    remember(policies, r.policy);
    remember(cells, Key{r.rule, r.policy});
    by_cell[{r.rule, r.policy}].push_back(&r);
    fair_by_rule[r.rule].emplace(r.source, r.fair_ratio);
  }

  auto table = [&](const std::string& title, const std::function<double(const ReportRow&)>& value,
                   bool with_fair_row) {
    std::string s = "## " + title + "\n\n| policy |";
    for (const auto& rule : rules) s += " " + rule + " |";
    s += "\n|---|";
    for (std::size_t i = 0; i < rules.size(); ++i) s += "---|";
    s += "\n";
    if (with_fair_row) {
      s += "| offline-fair |";
      for (const auto& rule : rules) {
        std::vector<double> v;
        for (const auto& [path, ratio] : fair_by_rule[rule]) v.push_back(ratio);
        s += " " + fixed3(mean_estimate(v).mean) + " |";
      }
      s += "\n";
    }
    for (const auto& policy : policies) {
      s += "| " + policy + " |";
      for (const auto& rule : rules) {
        const auto it = by_cell.find({rule, policy});
        if (it == by_cell.end()) {
          s += " - |";
          continue;
        }
        std::vector<double> v;
        for (const ReportRow* r : it->second) v.push_back(value(*r));
        s += " " + fixed3(mean_estimate(v).mean) + " |";
      }
      s += "\n";
    }
    return s + "\n";
  };

  std::string md = "# Results report\n\n";
  md += table("Efficiency (mean ratio to OPT)", [](const ReportRow& r) { return r.efficiency; }, true);
  md += table("Max UFR (mean over paths)", [](const ReportRow& r) { return r.max_ufr; }, false);
  md += table("Median positive UFR (mean over paths)", [](const ReportRow& r) { return r.median_ufr; }, false);

  auto floor_at = [](double v) { return std::max(v, kPlotFloor); };
  std::string bars = "rule,policy,aggregate,mean,se\n";
  std::string groups = "rule,policy,path_id,group,ufr\n";
  for (const auto& key : cells) {
    std::vector<double> mx;
    std::vector<double> med;
    for (const ReportRow* r : by_cell[key]) {
      mx.push_back(floor_at(r->max_ufr));
      med.push_back(floor_at(r->median_ufr));
      for (const auto& [g, u] : r->group_ufr) {
        groups += key.first + "," + key.second + "," + r->path_id + "," + g + "," + format_number(floor_at(u)) + "\n";
      }
    }
    const Estimate m = mean_estimate(mx);
    const Estimate d = mean_estimate(med);
    bars += key.first + "," + key.second + ",max," + format_number(m.mean) + "," + format_number(m.se) + "\n";
    bars += key.first + "," + key.second + ",median," + format_number(d.mean) + "," + format_number(d.se) + "\n";
  }

  ensure_directory(out_dir);
  write_file(join_path(out_dir, "report.md"), md);
  write_file(join_path(out_dir, "ufr_bars.csv"), bars);
  write_file(join_path(out_dir, "ufr_groups.csv"), groups);
  out << "report: " << rows.size() << " rows from " << files.size() << " file(s) -> " << out_dir << "\n";
  return kOk;
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw InvariantError("cannot format number");
  return std::string(buf, ptr);
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InvariantError*>(&error)) return kInvariant;
  if (dynamic_cast<const ArgumentError*>(&error) || dynamic_cast<const ConfigError*>(&error) ||
      dynamic_cast<const CLI::ParseError*>(&error)) {
    return kUsage;
  }
  if (dynamic_cast<const DataError*>(&error) || dynamic_cast<const RangeError*>(&error) ||
      dynamic_cast<const ShapeError*>(&error) || dynamic_cast<const json::exception*>(&error)) {
    return kData;
  }
  if (dynamic_cast<const SolverError*>(&error)) return kSolver;
  return 1;
}

std::string instance_to_json(const Instance& instance) {
  ordered_json doc;
  ordered_json locs = ordered_json::array();
  for (const auto& l : instance.locations()) locs.push_back({{"id", l.id}, {"capacity", l.capacity}});
  doc["locations"] = locs;
  doc["horizon"] = instance.horizon();
  doc["groups"] = instance.groups();
  return doc.dump(2) + "\n";
}

Instance instance_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    std::vector<LocationSpec> locs;
    for (const auto& l : doc.at("locations")) {
      locs.push_back({l.at("id").get<std::string>(), l.at("capacity").get<long>()});
      check_identifier(locs.back().id, "location id");
    }
    const auto groups = doc.at("groups").get<std::vector<std::string>>();
    for (const auto& g : groups) check_identifier(g, "group id");
    return Instance::create(std::move(locs), doc.at("horizon").get<long>(), groups);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed instance: ") + e.what());
  }
}

Instance read_instance(const std::string& path) { return instance_from_json(read_file(path)); }

std::string cases_to_csv(const Instance& instance, const CaseTable& table) {
  if (table.ids.size() != table.path.size()) throw ShapeError("one case id per case is required");
  std::string s = "case_id,group";
  for (const auto& l : instance.locations()) s += ",w_" + l.id;
  s += "\n";
  for (std::size_t i = 0; i < table.path.size(); ++i) {
    const Case& c = table.path.cases[i];
    validate_case(instance, c);
    s += table.ids[i] + "," + instance.groups()[static_cast<std::size_t>(c.group)];
    for (double w : c.scores) s += "," + format_number(w);
    s += "\n";
  }
  return s;
}

CaseTable cases_from_csv(const Instance& instance, const std::string& text) {
  const auto lines = lines_of(text);
  std::string expected = "case_id,group";
  for (const auto& l : instance.locations()) expected += ",w_" + l.id;
  if (lines.empty() || lines[0] != expected) {
    throw DataError("cases header must be '" + expected + "'");
  }
  const std::size_t m = instance.num_locations();
  CaseTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "cases line " + std::to_string(i + 1);
    const auto cells = split(lines[i], ',');
    if (cells.size() != m + 2) throw DataError(where + ": expected " + std::to_string(m + 2) + " columns");
    check_identifier(cells[0], "case id");
    const int g = instance.group_index(cells[1]);
    if (g < 0) throw DataError(where + ": unknown group '" + cells[1] + "'");
    Case c{g, {}};
    for (std::size_t j = 0; j < m; ++j) c.scores.push_back(parse_number(cells[j + 2], where));
    try {
      validate_case(instance, c);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    table.ids.push_back(cells[0]);
    table.path.cases.push_back(std::move(c));
  }
  return table;
}

CaseTable read_cases(const Instance& instance, const std::string& path) {
  return cases_from_csv(instance, read_file(path));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ArgumentError("cannot write " + path);
  f << contents;
  if (!f) throw ArgumentError("failed writing " + path);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-constrained online assignment experiments"};
  app.name("fairalloc");
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write instance.json and cases.csv for a scenario");
  gen_cmd->add_option("--scenario", gen.source.scenario, "fig1, fig1-stochastic, hard-c1, uniform")->required();
  gen_cmd->add_option("--k", gen.source.k, "hard-c1 scale");
  gen_cmd->add_option("--t", gen.source.t, "uniform horizon");
  gen_cmd->add_option("--m", gen.source.m, "uniform locations");
  gen_cmd->add_option("--g", gen.source.g, "uniform groups");
  gen_cmd->add_option("--seed", gen.seed, "master seed");
  gen_cmd->add_option("--out", gen.out, "output directory");

  DualsArgs duals;
  CLI::App* duals_cmd = app.add_subcommand("duals", "solve for the dual multipliers and write them as JSON");
  add_source_options(duals_cmd, duals.source);
  duals_cmd->add_option("--rule", duals.rule, "random, proportional, maxmin, hard-c1");
  duals_cmd->add_option("--K", duals.samples, "number of sampled paths");
  duals_cmd->add_option("--stats-K", duals.stats_samples, "paths for rule statistics");
  duals_cmd->add_option("--method", duals.method, "auto, lp, subgradient");
  duals_cmd->add_option("--seed", duals.seed, "master seed")->required();
  duals_cmd->add_option("--out", duals.out, "output file, stdout when omitted");
  duals_cmd->add_flag("--frozen-path", duals.frozen_path, "use the given cases as the single sample");
  duals_cmd->add_flag("--bp", duals.bp, "zero the requirements (fairness-blind duals)");
  duals_cmd->add_flag("--fresh", duals.fresh, "subgradient on freshly sampled paths");
  duals_cmd->add_option("--psi", duals.psi, "theoretical checks that the CBP parameters exist");
  duals_cmd->add_option("--beta", duals.beta, "CBP confidence parameter");
  duals_cmd->add_option("--iterations", duals.subgradient.iterations, "subgradient iterations");
  duals_cmd->add_option("--step-scale", duals.subgradient.step_scale, "subgradient step scale c");
  duals_cmd->add_option("--minibatch", duals.subgradient.minibatch, "subgradient minibatch");

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run policies over sampled paths");
  sim_cmd->add_option("--config", sim.config, "JSON config; flags override its fields");
  add_source_options(sim_cmd, sim.source);
  sim_cmd->add_option("--replay", sim.replay, "cases.csv replayed as the only path");
  sim_cmd->add_option("--rule", sim.rule, "random, proportional, maxmin, hard-c1");
  sim_cmd->add_option("--policies", sim.policies, "comma list of rand, greedy, bp, abp, cbp");
  sim_cmd->add_option("--paths", sim.paths, "number of evaluation paths");
  sim_cmd->add_option("--K", sim.samples, "paths for the duals");
  sim_cmd->add_option("--stats-K", sim.stats_samples, "paths for rule statistics");
  sim_cmd->add_option("--fair-K", sim.fair_samples, "paths for the expected fair benchmark");
  sim_cmd->add_option("--seed", sim.seed, "master seed");
  sim_cmd->add_option("--out", sim.out, "output directory");
  sim_cmd->add_option("--duals", sim.duals, "duals.json used by abp and cbp");
  sim_cmd->add_option("--method", sim.method, "auto, lp, subgradient");
  sim_cmd->add_option("--cbp-mode", sim.cbp_mode, "empirical or theoretical");
  sim_cmd->add_option("--beta", sim.beta, "CBP confidence parameter");
  sim_cmd->add_flag("--rand-uniform", sim.rand_uniform, "rand picks uniformly among open locations");
  sim_cmd->add_flag("--check-feasibility", sim.check_feasibility, "check ex-post feasibility of each path");

  std::vector<std::string> report_files;
  std::string report_out = ".";
  CLI::App* report_cmd = app.add_subcommand("report", "tables and plot data from results.csv files");
  report_cmd->add_option("--results", report_files, "results.csv files")->required();
  report_cmd->add_option("--out", report_out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (duals_cmd->parsed()) return cmd_duals(duals, out);
    if (sim_cmd->parsed()) return cmd_simulate(*sim_cmd, sim, out);
    return cmd_report(report_files, report_out, out);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << "error: " << e.what() << "\n";
    return code;
  }
}

}  // namespace fairalloc::cli
