// Command-line front end: case studies, sweeps, Monte Carlo batches,
// single-instance solves and SCA convergence traces.
//
// Exit status: 0 success, 1 a --verify check failed, 2 bad usage or config,
// 3 a run failed.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "qsel/harness/output.hpp"

namespace {

using namespace qsel;
using namespace qsel::harness;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string strategies;
  unsigned jobs = 1;
  bool verify = false;
  bool timing = false;
  std::optional<int> trials;
  int which = 0;
};

std::vector<Strategy> parse_strategy_list(const std::string& list) {
  std::vector<Strategy> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto s = parse_strategy(name);
    if (!s) throw ConfigError("--strategies", "unknown strategy '" + name + "'");
    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
  }
  if (out.empty()) throw ConfigError("--strategies", "empty list");
  return out;
}

ExperimentConfig make_config(const Options& o, Mode mode) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
    if (cfg.mode != mode && !(mode == Mode::solve && cfg.instance)) {
      throw ConfigError("mode", "config is for '" + std::string(to_string(cfg.mode)) + "', command is '" +
                                    std::string(to_string(mode)) + "'");
    }
  } else {
    cfg.mode = mode;
    if (mode == Mode::case_study) cfg.sca = ScaConfig::coarse();
  }
  cfg.mode = mode;
  if (mode == Mode::case_study) cfg.strategies = {Strategy::proposed, Strategy::snm, Strategy::pmf, Strategy::optimal};
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.trials) cfg.trials = *o.trials;
  if (!o.strategies.empty()) cfg.strategies = parse_strategy_list(o.strategies);
  if (o.which != 0) cfg.case_id = o.which;
  cfg.validate();
  return cfg;
}

int report_checks(const std::vector<CheckOutcome>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    std::printf("verify %-34s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.detail.c_str());
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

void print_summary(const RunResult& res) {
  std::fputs(summary_csv(res).c_str(), stdout);
}

int run(Mode mode, const Options& o) {
  const ExperimentConfig cfg = make_config(o, mode);
  const std::filesystem::path dir = cfg.output_dir;
  RunResult res;
  switch (mode) {
    case Mode::case_study: res = run_case_study(cfg.case_id, cfg.strategies, cfg.sca); break;
    case Mode::sweep: res = run_bandwidth_sweep(cfg, o.jobs); break;
    case Mode::monte_carlo: res = run_monte_carlo(cfg, o.jobs); break;
    case Mode::solve: res = run_single(cfg.instance->problem(), cfg.strategies, cfg.sca); break;
  }
  write_results(res, dir, WriteOptions{o.timing});
  if (mode == Mode::case_study) {
    const std::string report = case_study_report(cfg.case_id, res);
    write_file(dir / "report.txt", report);
    std::fputs(report.c_str(), stdout);
  } else {
    print_summary(res);
  }
  if (!o.verify) return 0;
  std::vector<CheckOutcome> checks{revalidate_decisions(dir / "decisions.jsonl")};
  if (std::any_of(res.records.begin(), res.records.end(),
                  [](const TrialRecord& r) { return r.strategy == Strategy::optimal; })) {
    checks.push_back(check_dominance(res));
  }
  if (mode == Mode::case_study) {
    for (auto& c : check_case_study(cfg.case_id, res)) checks.push_back(std::move(c));
  }
  return report_checks(checks);
}

/// Objective history of the relaxed problem on every sensor that can meet
/// its threshold alone.
int trace(const Options& o) {
  Problem pr = case_study(1);
  ScaConfig sca;
  if (!o.config.empty()) {
    ExperimentConfig cfg = load_config(o.config);
    if (cfg.instance) {
      pr = cfg.instance->problem();
    } else if (cfg.mode == Mode::case_study) {
      pr = case_study(o.which != 0 ? o.which : cfg.case_id);
    } else {
      const double bw = cfg.mode == Mode::sweep ? cfg.bandwidths_hz.front() : cfg.bandwidth_hz;
      const std::uint64_t seed = derive_seed(o.seed.value_or(cfg.seed), 0, 0);
      pr = random_problem(seed, bw, cfg.system, cfg.sensors, cfg.channel);
    }
    sca = cfg.sca;
  } else if (o.which != 0) {
    pr = case_study(o.which);
  }
  SensorSet candidates;
  for (std::size_t i = 0; i < pr.inst.sensor_count(); ++i) {
    if (pr.real.can_transmit_alone(i)) candidates.push_back(i);
  }
  const RelaxedInstance ri{pr.inst, pr.p_prev, pr.real, candidates};
  const ScaResult r = sca_solve(ri, sca);
  std::ostringstream os;
  write_trace_csv(os, r);
  if (o.out) {
    std::error_code ec;
    std::filesystem::create_directories(*o.out, ec);
    write_file(std::filesystem::path(*o.out) / "trace.csv", os.str());
  } else {
    std::fputs(os.str().c_str(), stdout);
  }
  return r.converged ? 0 : 3;
}

void add_common(CLI::App* cmd, Options& o, bool batch) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  cmd->add_option("--strategies", o.strategies, "comma-separated: proposed,snm,pmf,optimal");
  cmd->add_flag("--verify", o.verify, "re-validate decisions and run golden checks");
  cmd->add_flag("--timing", o.timing, "record wall times in results.csv");
  if (batch) {
    cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::Range(1u, 256u));
    cmd->add_option("--trials", o.trials, "trial count (overrides the config)")->check(CLI::PositiveNumber);
  } else {
    cmd->add_option("--jobs", o.jobs, "accepted for uniformity; single runs are sequential");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor selection for remote state estimation under SINR constraints"};
  app.require_subcommand(1);
  Options o;

  auto* cs = app.add_subcommand("case-study", "run a built-in two-case study");
  cs->add_option("case", o.which, "1 or 2")->check(CLI::IsMember({1, 2}));
  add_common(cs, o, false);
  auto* sweep = app.add_subcommand("sweep", "random instances over a bandwidth grid");
  add_common(sweep, o, true);
  auto* mc = app.add_subcommand("monte-carlo", "random instances at one bandwidth");
  add_common(mc, o, true);
  auto* solve = app.add_subcommand("solve", "one instance given literally in the config");
  add_common(solve, o, false);
  auto* tr = app.add_subcommand("trace", "SCA convergence history as CSV");
  tr->add_option("case", o.which, "built-in case 1 or 2 when no config is given")->check(CLI::IsMember({1, 2}));
  add_common(tr, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*tr) return trace(o);
    if (*solve && o.config.empty()) throw ConfigError("--config", "solve needs a config with an instance");
    const Mode mode = *cs ? Mode::case_study : *sweep ? Mode::sweep : *mc ? Mode::monte_carlo : Mode::solve;
    return run(mode, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
