// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "qsel/harness/output.hpp"

using namespace qsel;
using namespace qsel::harness;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* spec, double v) { return harness::detail::fmt(spec, v); }

const std::vector<Strategy> kAll{Strategy::proposed, Strategy::snm, Strategy::pmf, Strategy::optimal};

Verdict case_studies() {
  Verdict v;
  const auto t0 = Clock::now();
  for (int which : {1, 2}) {
    const auto res = run_case_study(which, kAll);
    for (const auto& c : check_case_study(which, res)) {
      if (c.name.find("removal") != std::string::npos) continue;
      v.require(c.passed, c.name + " got " + c.detail);
    }
  }
  const double s = seconds_since(t0);
  v.require(s < 10.0, "runtime " + fmt("%.1f", s) + " s");
  v.note("runtime " + fmt("%.2f", s) + " s");
  return v;
}

Verdict removal_order() {
  struct Row {
    std::vector<double> gamma;
  };
  const std::vector<std::vector<Row>> tables{
      {{{0.1882, 1.0, 0.0600, 1.0, 1.0}}, {{1.0, 0.1559, 1.0, 1.0}}, {{1.0, 1.0, 1.0}}},
      {{{1.0, 0.1015, 1.0, 0.1015, 0.1015}}, {{1.0, 1.0, 0.1558, 0.1558}}, {{1.0, 1.0, 0.3332}}, {{1.0, 1.0}}}};
  Verdict v;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int which : {1, 2}) {
    const auto res = run_case_study(which, {Strategy::proposed});
    for (const auto& c : check_case_study(which, res)) {
      if (c.name.find("removal") != std::string::npos) v.require(c.passed, c.name + " got " + c.detail);
    }
    const auto& log = res.records.front().decision.removal_log;
    const auto& table = tables[static_cast<std::size_t>(which - 1)];
    if (log.size() != table.size()) {
      v.require(false, "case " + std::to_string(which) + " has " + std::to_string(log.size()) + " steps");
      continue;
    }
    for (std::size_t k = 0; k < log.size(); ++k) {
      const auto& want = table[k].gamma;
      if (static_cast<std::size_t>(log[k].gamma.size()) != want.size()) {
        v.require(false, "case " + std::to_string(which) + " step " + std::to_string(k + 1) + " size");
        continue;
      }
      for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(log[k].gamma(static_cast<Index>(i)) - want[i]));
      }
    }
  }
  v.require(worst <= 0.05, "gamma deviation " + fmt("%.4f", worst));
  const double s = seconds_since(t0);
  v.require(s < 30.0, "runtime " + fmt("%.1f", s) + " s");
  v.note("max gamma deviation " + fmt("%.4f", worst) + ", runtime " + fmt("%.2f", s) + " s");
  return v;
}

Verdict sca_convergence() {
  Verdict v;
  const double grid[] = {20e6, 50e6, 100e6, 150e6, 200e6, 300e6, 500e6};
  ScaConfig cfg;
  cfg.outer_tolerance = 1e-9;
  cfg.max_outer_iterations = 5000;
  std::mt19937_64 rng(3003);
  int instances = 0, draws = 0, total_iterations = 0;
  double worst_rise = 0.0, worst_residual = -1.0, worst_kkt = 0.0;
  while (instances < 100 && draws < 10000) {
    const Index n = 1 + draws % 5;
    const std::size_t sensors = 2 + static_cast<std::size_t>(draws % 7);
    const auto pr = oracle::small_problem(rng, n, sensors, grid[draws % 7]);
    ++draws;
    SensorSet c;
    for (std::size_t i = 0; i < sensors; ++i) {
      if (pr.real.can_transmit_alone(i)) c.push_back(i);
    }
    const RelaxedInstance ri{pr.inst, pr.p_prev, pr.real, c};
    if (c.empty() || !ri.assumption_holds()) continue;
    ++instances;
    const auto res = sca_solve(ri, cfg);
    total_iterations += res.iterations;
    for (std::size_t k = 1; k < res.history.size(); ++k) {
      worst_rise = std::max(worst_rise, res.history[k] - res.history[k - 1]);
    }
    double residual = relaxed_constraint_residual(res.state, ri);
    for (double g : oracle::relaxed_problem(res.state, ri).values) residual = std::max(residual, g);
    worst_residual = std::max(worst_residual, residual);
    worst_kkt = std::max(worst_kkt, oracle::kkt_residual(res.state, ri).residual());
  }
  v.require(instances == 100, "only " + std::to_string(instances) + " instances");
  v.require(worst_rise <= 1e-9, "objective rose by " + fmt("%.3g", worst_rise));
  v.require(worst_residual <= 1e-6, "constraint residual " + fmt("%.3g", worst_residual));
  v.require(worst_kkt <= 1e-4, "KKT residual " + fmt("%.3g", worst_kkt));
  v.note(std::to_string(instances) + " instances, worst rise " + fmt("%.2g", worst_rise) + ", worst residual " +
         fmt("%.2g", worst_residual) + ", worst KKT " + fmt("%.2g", worst_kkt) + ", " +
         std::to_string(total_iterations) + " outer iterations");
  return v;
}

Verdict information_form() {
  Verdict v;
  std::mt19937_64 rng(4004);
  double worst_diff = 0.0, worst_eig = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + t % 5;
    const std::size_t sensors = 1 + static_cast<std::size_t>(t % 8);
    const auto inst = oracle::random_instance(rng, n, sensors);
    const Covariance prior(oracle::random_spd(rng, n));
    const Vector g = oracle::random_binary(rng, sensors);
    const Covariance info = posterior_info_form(prior, g, inst);
    const Covariance gain = posterior_gain_form(prior, g, inst);
    worst_diff = std::max(worst_diff, (info.matrix() - gain.matrix()).cwiseAbs().maxCoeff());
    worst_eig = std::min(worst_eig, lmi_min_eigenvalue(g, prior, gain, inst));
  }
  v.require(worst_diff <= 1e-8, "max entry difference " + fmt("%.3g", worst_diff));
  v.require(worst_eig >= -1e-8, "LMI eigenvalue " + fmt("%.3g", worst_eig));
  v.note("1000 pairs, max entry difference " + fmt("%.2g", worst_diff) + ", min LMI eigenvalue " +
         fmt("%.2g", worst_eig));
  return v;
}

Verdict gradient() {
  Verdict v;
  std::mt19937_64 rng(5005);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 5;
    const std::size_t sensors = 1 + static_cast<std::size_t>(t % 8);
    const auto inst = oracle::random_instance(rng, n, sensors);
    const Matrix prior = oracle::prior_of(oracle::random_spd(rng, n), inst);
    const Vector x = 0.01 + 0.98 * oracle::random_relaxed(rng, sensors).array();
    const auto f = [&](const Vector& g) { return oracle::explicit_posterior(prior, g, inst).trace(); };
    const Vector fd = oracle::central_difference(f, x, 1e-5);
    const Vector g = InformationObjective(Covariance(prior), inst).gradient(x);
    worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  v.require(worst <= 1e-5, "relative error " + fmt("%.3g", worst));
  v.note("200 points, worst relative error " + fmt("%.2g", worst));
  return v;
}

ChannelRealization random_realization(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChannelRealization r;
  r.h.resize(static_cast<Index>(n));
  for (Index i = 0; i < r.h.size(); ++i) r.h(i) = std::pow(10.0, 2.0 * u(rng) - 1.0);
  r.sigma2 = 0.01;
  r.p_max = Vector::Ones(static_cast<Index>(n));
  r.theta = Vector::Constant(static_cast<Index>(n), 0.05 + 0.6 * u(rng));
  return r;
}

Verdict oracle_properties() {
  Verdict v;
  std::mt19937_64 rng(6006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sinr = 0.0;
  std::size_t samples = 0, minimality_failures = 0, monotonicity_failures = 0, feasible_sets = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 6);
    const auto real = random_realization(rng, n);
    const std::uint32_t count = 1u << n;
    std::vector<bool> feasible(count, false);
    for (std::uint32_t mask = 1; mask < count; ++mask) {
      const SensorSet s = qsel::detail::from_mask(mask, n);
      const auto verdict = min_power_vector(s, real);
      feasible[mask] = verdict.feasible;
      if (!verdict.feasible) continue;
      ++feasible_sets;
      const Vector& p = *verdict.p_min;
      for (std::size_t i : s) {
        worst_sinr = std::max(worst_sinr, std::abs(sinr(i, p, real) - real.theta(static_cast<Index>(i))));
      }
      for (int k = 0; k < 50; ++k) {
        Vector q = p * (1.0 + 2.0 * u(rng));
        for (std::size_t i : s) q(static_cast<Index>(i)) *= 0.9 + 0.2 * u(rng);
        q = q.cwiseMin(real.p_max);
        if (!check_qos(s, q, real, 0.0)) continue;
        ++samples;
        for (std::size_t i : s) {
          if (q(static_cast<Index>(i)) < p(static_cast<Index>(i)) * (1.0 - 1e-12)) ++minimality_failures;
        }
      }
    }
    for (std::uint32_t mask = 1; mask < count; ++mask) {
      if (feasible[mask]) continue;
      for (std::uint32_t super = mask; super < count; super = (super + 1) | mask) {
        if (feasible[super]) ++monotonicity_failures;
      }
    }
  }
  v.require(worst_sinr <= 1e-10, "SINR deviation " + fmt("%.3g", worst_sinr));
  v.require(minimality_failures == 0, std::to_string(minimality_failures) + " samples below p_min");
  v.require(samples > 0, "no feasible samples");
  v.require(monotonicity_failures == 0, std::to_string(monotonicity_failures) + " feasible supersets");
  v.note(std::to_string(feasible_sets) + " feasible sets, " + std::to_string(samples) +
         " sampled power vectors, worst SINR deviation " + fmt("%.2g", worst_sinr));
  return v;
}

Verdict heuristic_quality(unsigned jobs) {
  Verdict v;
  const auto t0 = Clock::now();
  const double grid[] = {20e6, 50e6, 100e6, 150e6, 200e6, 300e6, 500e6};
  RandomSensorSpec sensors;
  sensors.count = 8;
  struct Pair {
    double heuristic, optimum;
  };
  const auto pairs = parallel_map(500, jobs, [&](std::size_t t) {
    const auto pr = random_problem(derive_seed(7007, t, 0), grid[t % 7], RandomSystemSpec{}, sensors,
                                   RandomChannelSpec{});
    return Pair{heuristic_select(pr.inst, pr.p_prev, pr.real).objective,
                brute_force_select(pr.inst, pr.p_prev, pr.real).objective};
  });
  std::size_t below = 0, exact = 0;
  double gap_sum = 0.0, gap_max = 0.0;
  for (const auto& p : pairs) {
    if (p.heuristic < p.optimum - 1e-9 * p.optimum) ++below;
    const double gap = (p.heuristic - p.optimum) / p.optimum;
    gap_sum += gap;
    gap_max = std::max(gap_max, gap);
    if (gap <= 1e-9) ++exact;
  }
  v.require(below == 0, std::to_string(below) + " heuristic objectives below the optimum");
  v.note("N=8: mean gap " + fmt("%.4g", gap_sum / 500.0) + ", max gap " + fmt("%.4g", gap_max) + ", optimal in " +
         std::to_string(exact) + "/500");

  for (int which : {1, 2}) {
    const auto res = run_case_study(which, {Strategy::proposed, Strategy::optimal});
    const double gap = res.records[0].decision.objective - res.records[1].decision.objective;
    v.require(std::abs(gap) <= 1e-12, "case " + std::to_string(which) + " gap " + fmt("%.3g", gap));
  }

  ExperimentConfig cfg = load_config(fs::path(QSEL_CONFIG_DIR) / "sweep.json");
  cfg.strategies = {Strategy::proposed, Strategy::snm, Strategy::pmf};
  const auto sweep = run_bandwidth_sweep(cfg, jobs);
  v.require(cfg.trials >= 200 && cfg.bandwidths_hz.size() >= 5, "sweep too small");
  std::string table;
  for (double bw : cfg.bandwidths_hz) {
    double mean[3] = {0, 0, 0};
    for (const auto& s : sweep.summary) {
      if (s.bandwidth_hz != bw) continue;
      mean[static_cast<int>(s.strategy)] = s.mean_objective;
    }
    const bool ordered = mean[0] <= mean[1] && mean[0] <= mean[2];
    v.require(ordered, "ordering fails at " + fmt("%.0f", bw / 1e6) + " MHz");
    table += (table.empty() ? "" : " ") + fmt("%.0f", bw / 1e6) + "MHz:" + fmt("%.4g", mean[0]) + "/" +
             fmt("%.4g", mean[1]) + "/" + fmt("%.4g", mean[2]);
  }
  v.note("sweep means proposed/snm/pmf " + table);
  const double s = seconds_since(t0);
  v.require(s < 900.0, "runtime " + fmt("%.0f", s) + " s");
  v.note("runtime " + fmt("%.1f", s) + " s");
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QSEL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  Verdict v;
  ExperimentConfig sweep = load_config(fs::path(QSEL_CONFIG_DIR) / "sweep.json");
  sweep.trials = 4;
  const auto a = results_csv(run_bandwidth_sweep(sweep, 1));
  const auto b = results_csv(run_bandwidth_sweep(sweep, 8));
  v.require(a == b, "in-process sweep differs between 1 and 8 jobs");

  const fs::path root = fs::temp_directory_path() / "qsel_acceptance";
  fs::remove_all(root);
  const std::string cfg_dir = QSEL_CONFIG_DIR;
  struct Command {
    std::string name, args;
  };
  const std::vector<Command> commands{
      {"case-study", "case-study 2"},
      {"sweep", "sweep --config " + cfg_dir + "/sweep.json --trials 3"},
      {"monte-carlo", "monte-carlo --config " + cfg_dir + "/monte-carlo.json --trials 4"},
      {"solve", "solve --config " + cfg_dir + "/solve.json"}};
  std::size_t compared = 0;
  for (const auto& c : commands) {
    std::vector<std::string> outputs;
    for (const char* jobs : {"1", "8", "8"}) {
      const fs::path dir = root / (c.name + "_" + jobs + "_" + std::to_string(outputs.size()));
      const int code = run_cli(c.args + " --seed 99 --jobs " + jobs + " --out " + dir.string());
      v.require(code == 0, c.name + " exited " + std::to_string(code));
      outputs.push_back(slurp(dir / "results.csv") + slurp(dir / "removal_log.jsonl"));
    }
    for (const auto& o : outputs) {
      v.require(!o.empty() && o == outputs.front(), c.name + " output not identical");
    }
    ++compared;
  }
  v.note(std::to_string(compared) + " commands identical across --jobs 1 and --jobs 8");
  return v;
}

}  // namespace

int main() {
  const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"case-study exactness", case_studies},
      {"removal order", removal_order},
      {"SCA monotone convergence", sca_convergence},
      {"information-form equivalence", information_form},
      {"gradient correctness", gradient},
      {"feasibility oracle properties", oracle_properties},
      {"heuristic quality", [jobs] { return heuristic_quality(jobs); }},
      {"determinism", determinism},
  };
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict v;
    try {
      v = criteria[k].run();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    all = all && v.passed;
    std::printf("criterion %zu %-30s %s  %s\n", k + 1, criteria[k].name, v.passed ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
