#pragma once

// Result persistence and re-validation.
//
//   results.csv        trial,seed,bandwidth_hz,strategy,selected,objective,n_selected,sca_iters,wall_ms
//   removal_log.jsonl  one line per relaxed solve of the proposed heuristic
//   decisions.jsonl    selected set, powers and the channel, enough to re-check QoS
//   summary.csv        per (bandwidth, strategy) statistics
//
// Sensor indices are 1-based in every file. Files are newline terminated
// and byte-identical for identical inputs unless wall times are requested.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qsel/harness/runner.hpp"

namespace qsel::harness {

inline constexpr const char* kCsvHeader =
    "trial,seed,bandwidth_hz,strategy,selected,objective,n_selected,sca_iters,wall_ms";

struct WriteOptions {
  /// Record measured wall times; otherwise the column is 0 so that output is
  /// reproducible byte for byte.
  bool timing = false;
};

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string one_based(const SensorSet& s) {
  std::string out;
  for (std::size_t i : s) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i + 1);
  }
  return out;
}

inline json one_based_json(const SensorSet& s) {
  json out = json::array();
  for (std::size_t i : s) out.push_back(i + 1);
  return out;
}

inline std::string bandwidth_field(const std::optional<double>& bw) {
  return bw ? fmt("%.0f", *bw) : std::string();
}

}  // namespace detail

inline std::string results_csv(const RunResult& res, const WriteOptions& opt = {}) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : res.records) {
    os << r.trial << ',' << r.seed << ',' << detail::bandwidth_field(r.bandwidth_hz) << ','
       << to_string(r.strategy) << ',' << detail::one_based(r.decision.selected) << ','
       << detail::fmt("%.12g", r.decision.objective) << ',' << r.decision.selected.size() << ','
       << r.decision.sca_iterations << ',' << (opt.timing ? detail::fmt("%.3f", r.wall_ms) : std::string("0"))
       << '\n';
  }
  return os.str();
}

inline std::string removal_log_jsonl(const RunResult& res) {
  std::ostringstream os;
  for (const auto& r : res.records) {
    for (const auto& step : r.decision.removal_log) {
      json line;
      line["trial"] = r.trial;
      line["bandwidth_hz"] = r.bandwidth_hz ? json(*r.bandwidth_hz) : json(nullptr);
      line["iteration"] = step.iteration;
      line["candidate_set"] = detail::one_based_json(step.candidates);
      line["gamma"] = detail::vector_json(step.gamma);
      line["p"] = detail::vector_json(step.p);
      line["removed"] = step.removed ? json(*step.removed + 1) : json(nullptr);
      os << line.dump() << '\n';
    }
  }
  return os.str();
}

inline std::string decisions_jsonl(const RunResult& res) {
  std::ostringstream os;
  for (const auto& r : res.records) {
    json line;
    line["trial"] = r.trial;
    line["bandwidth_hz"] = r.bandwidth_hz ? json(*r.bandwidth_hz) : json(nullptr);
    line["strategy"] = std::string(to_string(r.strategy));
    line["selected"] = detail::one_based_json(r.decision.selected);
    line["objective"] = r.decision.objective;
    line["p"] = detail::vector_json(r.decision.p);
    line["h"] = detail::vector_json(r.channel->h);
    line["sigma2"] = r.channel->sigma2;
    line["p_max"] = detail::vector_json(r.channel->p_max);
    line["theta"] = detail::vector_json(r.channel->theta);
    os << line.dump() << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const RunResult& res) {
  std::ostringstream os;
  os << "bandwidth_hz,strategy,trials,mean_objective,std_objective,mean_n_selected,mean_gap,max_gap\n";
  for (const auto& s : res.summary) {
    os << detail::bandwidth_field(s.bandwidth_hz) << ',' << to_string(s.strategy) << ',' << s.trials << ','
       << detail::fmt("%.10g", s.mean_objective) << ',' << detail::fmt("%.10g", s.std_objective) << ','
       << detail::fmt("%.6g", s.mean_selected) << ','
       << (s.mean_gap ? detail::fmt("%.6g", *s.mean_gap) : std::string()) << ','
       << (s.max_gap ? detail::fmt("%.6g", *s.max_gap) : std::string()) << '\n';
  }
  return os.str();
}

/// Strategy comparison followed by the removal log of the heuristic.
inline std::string case_study_report(int which, const RunResult& res) {
  std::ostringstream os;
  os << "Case " << which << "\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-18s %s\n", "strategy", "selected", "Tr{P}");
  os << buf;
  for (const auto& r : res.records) {
    const std::string set = "{" + detail::one_based(r.decision.selected) + "}";
    std::snprintf(buf, sizeof buf, "%-10s %-18s %.4f\n", std::string(to_string(r.strategy)).c_str(), set.c_str(),
                  r.decision.objective);
    os << buf;
  }
  for (const auto& r : res.records) {
    if (r.strategy != Strategy::proposed) continue;
    os << "\nremoval log (proposed)\n";
    for (const auto& step : r.decision.removal_log) {
      os << "  iteration " << step.iteration << "  S={" << detail::one_based(step.candidates) << "}\n    gamma:";
      for (Index k = 0; k < step.gamma.size(); ++k) os << ' ' << detail::fmt("%.4f", step.gamma(k));
      os << "\n    p:    ";
      for (Index k = 0; k < step.p.size(); ++k) os << ' ' << detail::fmt("%.4f", step.p(k));
      os << "\n    removed: " << (step.removed ? std::to_string(*step.removed + 1) : std::string("none")) << '\n';
    }
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

/// Writes the run's files into `dir` (created if needed).
inline void write_results(const RunResult& res, const std::filesystem::path& dir, const WriteOptions& opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
  write_file(dir / "results.csv", results_csv(res, opt));
  write_file(dir / "removal_log.jsonl", removal_log_jsonl(res));
  write_file(dir / "decisions.jsonl", decisions_jsonl(res));
  write_file(dir / "summary.csv", summary_csv(res));
}

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Reloads decisions.jsonl and re-checks every decision's QoS constraints.
inline CheckOutcome revalidate_decisions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) return {"decisions re-validate", false, "cannot open " + file.string()};
  std::string line;
  std::size_t count = 0, failed = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    ChannelRealization real;
    const auto vec = [&](const char* key) {
      const auto v = j.at(key).get<std::vector<double>>();
      return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    };
    real.h = vec("h");
    real.p_max = vec("p_max");
    real.theta = vec("theta");
    real.sigma2 = j.at("sigma2").get<double>();
    SensorSet selected;
    for (const auto& s : j.at("selected")) selected.push_back(s.get<std::size_t>() - 1);
    ++count;
    if (!check_qos(selected, vec("p"), real)) ++failed;
  }
  return {"decisions re-validate", failed == 0 && count > 0,
          std::to_string(count - failed) + "/" + std::to_string(count) + " decisions pass QoS"};
}

/// No strategy beats the exhaustive optimum of its trial.
inline CheckOutcome check_dominance(const RunResult& res) {
  std::size_t compared = 0, violations = 0;
  for (const auto& r : res.records) {
    for (const auto& o : res.records) {
      if (o.strategy != Strategy::optimal || o.trial != r.trial || o.bandwidth_hz != r.bandwidth_hz) continue;
      ++compared;
      if (r.decision.objective < o.decision.objective - 1e-9 * std::max(1.0, o.decision.objective)) ++violations;
    }
  }
  return {"optimum dominates", violations == 0,
          compared == 0 ? "no optimum computed" : std::to_string(violations) + " violations in " + std::to_string(compared)};
}

/// Golden values for the two built-in case studies.
inline std::vector<CheckOutcome> check_case_study(int which, const RunResult& res) {
  struct Golden {
    Strategy s;
    SensorSet set;  // 1-based
    double objective;
  };
  const std::vector<Golden> golden =
      which == 1 ? std::vector<Golden>{{Strategy::proposed, {2, 4, 5}, 0.0645},
                                       {Strategy::pmf, {2, 3}, 0.0822},
                                       {Strategy::optimal, {2, 4, 5}, 0.0645}}
                 : std::vector<Golden>{{Strategy::proposed, {1, 3}, 0.1091},
                                       {Strategy::pmf, {1, 3}, 0.1091},
                                       {Strategy::optimal, {1, 3}, 0.1091}};
  std::vector<CheckOutcome> out;
  for (const auto& g : golden) {
    const auto it = std::find_if(res.records.begin(), res.records.end(),
                                 [&](const TrialRecord& r) { return r.strategy == g.s; });
    CheckOutcome c{"case " + std::to_string(which) + " " + std::string(to_string(g.s)), false, "not run"};
    if (it != res.records.end()) {
      SensorSet got;
      for (std::size_t i : it->decision.selected) got.push_back(i + 1);
      c.passed = got == g.set && std::abs(it->decision.objective - g.objective) <= 5e-4;
      c.detail = "{" + detail::one_based(it->decision.selected) + "} " + detail::fmt("%.5f", it->decision.objective);
    }
    out.push_back(c);
  }
  const auto prop = std::find_if(res.records.begin(), res.records.end(),
                                 [](const TrialRecord& r) { return r.strategy == Strategy::proposed; });
  if (prop != res.records.end()) {
    std::vector<std::size_t> order;
    for (const auto& step : prop->decision.removal_log) {
      if (step.removed) order.push_back(*step.removed + 1);
    }
    const std::vector<std::size_t> expected = which == 1 ? std::vector<std::size_t>{1, 3}
                                                         : std::vector<std::size_t>{2, 4, 5};
    std::string got;
    for (std::size_t s : order) got += (got.empty() ? "" : ",") + std::to_string(s);
    out.push_back({"case " + std::to_string(which) + " removal order", order == expected, "(" + got + ")"});
  }
  if (which == 2) {
    const Problem pr = case_study(2);
    Vector gamma = Vector::Zero(5);
    gamma(1) = gamma(3) = gamma(4) = 1.0;
    const double v = objective_trace(gamma, pr.p_prev, pr.inst);
    out.push_back({"case 2 subset {2,4,5} objective", std::abs(v - 0.2857) <= 5e-4, detail::fmt("%.5f", v)});
  }
  return out;
}

}  // namespace qsel::harness
