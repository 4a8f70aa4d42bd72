#pragma once

// Experiment runners: case studies, bandwidth sweeps, fixed-bandwidth Monte
// Carlo batches and single solves. Trials run on a small worker pool and
// are merged back in (grid point, trial, strategy) order, so results do not
// depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "qsel/harness/config.hpp"

namespace qsel::harness {

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<double> bandwidth_hz;
  Strategy strategy = Strategy::proposed;
  SelectionDecision decision;
  double wall_ms = 0.0;
  /// Channel the decision was made for; kept for re-validation.
  std::shared_ptr<const ChannelRealization> channel;
};

struct StrategySummary {
  std::optional<double> bandwidth_hz;
  Strategy strategy = Strategy::proposed;
  std::size_t trials = 0;
  double mean_objective = 0.0;
  double std_objective = 0.0;
  double mean_selected = 0.0;
  /// Mean relative gap (obj - opt) / opt; set when the optimum was computed.
  std::optional<double> mean_gap;
  std::optional<double> max_gap;
};

struct RunResult {
  Mode mode = Mode::sweep;
  std::vector<TrialRecord> records;
  std::vector<StrategySummary> summary;
};

/// Runs f(0) .. f(count - 1) on `jobs` threads and returns results by index.
/// The exception of the lowest failing index is rethrown.
template <class F>
auto parallel_map(std::size_t count, unsigned jobs, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  std::vector<R> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

/// Runs every strategy on one problem. Wall time is measured per strategy.
inline std::vector<TrialRecord> run_strategies(const Problem& pr, const std::vector<Strategy>& strategies,
                                               const ScaConfig& sca, std::size_t trial, std::uint64_t seed,
                                               std::optional<double> bandwidth) {
  auto channel = std::make_shared<const ChannelRealization>(pr.real);
  std::vector<TrialRecord> out;
  for (Strategy s : strategies) {
    const auto t0 = std::chrono::steady_clock::now();
    SelectionDecision d = run_strategy(s, pr.inst, pr.p_prev, pr.real, sca);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.push_back({trial, seed, bandwidth, s, std::move(d), ms, channel});
  }
  return out;
}

/// Per (bandwidth, strategy) statistics in first-appearance order.
inline std::vector<StrategySummary> summarize(const std::vector<TrialRecord>& records) {
  struct Key {
    std::optional<double> bw;
    Strategy s;
  };
  std::vector<Key> keys;
  for (const auto& r : records) {
    const bool seen = std::any_of(keys.begin(), keys.end(), [&](const Key& k) {
      return k.bw == r.bandwidth_hz && k.s == r.strategy;
    });
    if (!seen) keys.push_back({r.bandwidth_hz, r.strategy});
  }
  std::vector<StrategySummary> out;
  for (const auto& k : keys) {
    StrategySummary s;
    s.bandwidth_hz = k.bw;
    s.strategy = k.s;
    double sum = 0.0, sum_sq = 0.0, sel = 0.0, gap_sum = 0.0, gap_max = 0.0;
    std::size_t gaps = 0;
    for (const auto& r : records) {
      if (r.bandwidth_hz != k.bw || r.strategy != k.s) continue;
      ++s.trials;
      sum += r.decision.objective;
      sum_sq += r.decision.objective * r.decision.objective;
      sel += static_cast<double>(r.decision.selected.size());
      const auto opt = std::find_if(records.begin(), records.end(), [&](const TrialRecord& o) {
        return o.strategy == Strategy::optimal && o.trial == r.trial && o.bandwidth_hz == r.bandwidth_hz;
      });
      if (opt != records.end()) {
        const double g = (r.decision.objective - opt->decision.objective) / opt->decision.objective;
        gap_sum += g;
        gap_max = std::max(gap_max, g);
        ++gaps;
      }
    }
    const double n = static_cast<double>(s.trials);
    s.mean_objective = sum / n;
    s.std_objective = s.trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0))) : 0.0;
    s.mean_selected = sel / n;
    if (gaps == s.trials) {
      s.mean_gap = gap_sum / n;
      s.max_gap = gap_max;
    }
    out.push_back(s);
  }
  return out;
}

inline RunResult run_case_study(int which, const std::vector<Strategy>& strategies,
                                const ScaConfig& sca = ScaConfig::coarse()) {
  const Problem pr = case_study(which);
  RunResult res;
  res.mode = Mode::case_study;
  res.records = run_strategies(pr, strategies, sca, 0, 0, std::nullopt);
  res.summary = summarize(res.records);
  return res;
}

/// Trials over a grid of bandwidths; each (trial, grid point) gets its own
/// derived seed and therefore its own geometry, channels and sensor models.
inline RunResult run_grid(const ExperimentConfig& cfg, const std::vector<double>& grid,
                          const std::vector<Strategy>& strategies, unsigned jobs, Mode mode) {
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  auto batches = parallel_map(grid.size() * trials, jobs, [&](std::size_t task) {
    const std::size_t g = task / trials;
    const std::size_t t = task % trials;
    const std::uint64_t seed = derive_seed(cfg.seed, t, g);
    const Problem pr = random_problem(seed, grid[g], cfg.system, cfg.sensors, cfg.channel);
    return run_strategies(pr, strategies, cfg.sca, t, seed, grid[g]);
  });
  RunResult res;
  res.mode = mode;
  for (auto& b : batches) {
    for (auto& r : b) res.records.push_back(std::move(r));
  }
  res.summary = summarize(res.records);
  return res;
}

inline RunResult run_bandwidth_sweep(const ExperimentConfig& cfg, unsigned jobs = 1) {
  if (cfg.bandwidths_hz.empty()) throw ConfigError("bandwidths_hz", "sweep needs a nonempty grid");
  return run_grid(cfg, cfg.bandwidths_hz, cfg.strategies, jobs, Mode::sweep);
}

/// Fixed-bandwidth batch. With at most 12 sensors the exhaustive optimum is
/// added (if not requested) so every strategy gets an optimality gap.
inline RunResult run_monte_carlo(const ExperimentConfig& cfg, unsigned jobs = 1) {
  auto strategies = cfg.strategies;
  const bool has_optimal = std::find(strategies.begin(), strategies.end(), Strategy::optimal) != strategies.end();
  if (!has_optimal && cfg.sensors.count <= 12) strategies.push_back(Strategy::optimal);
  return run_grid(cfg, {cfg.bandwidth_hz}, strategies, jobs, Mode::monte_carlo);
}

inline RunResult run_single(const Problem& pr, const std::vector<Strategy>& strategies, const ScaConfig& sca) {
  RunResult res;
  res.mode = Mode::solve;
  res.records = run_strategies(pr, strategies, sca, 0, 0, std::nullopt);
  res.summary = summarize(res.records);
  return res;
}

}  // namespace qsel::harness
