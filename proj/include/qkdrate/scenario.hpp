// Copyright 2026 The qkdrate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qkdrate/dual_solver.hpp"
#include "qkdrate/errors.hpp"
#include "qkdrate/primal_oracle.hpp"
#include "qkdrate/problem.hpp"
#include "qkdrate/protocols.hpp"

namespace qkdrate {

struct SweepSpec {
  std::string param;
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;

  /// start, start + step, ... up to stop (inclusive within 1e-9 steps).
  std::vector<double> points() const {
    const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (long long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
};

inline bool is_integer_param(const std::string& name) { return name == "n" || name == "d" || name == "level"; }

/// Parses PARAM=START:STOP:STEP.
inline SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep must look like PARAM=START:STOP:STEP, got \"" + text + "\"");
  SweepSpec s;
  s.param = text.substr(0, eq);
  if (s.param != "q" && s.param != "theta" && s.param != "p" && s.param != "n" && s.param != "d") {
    throw ConfigError("sweep parameter must be one of q, theta, p, n, d; got \"" + s.param + "\"");
  }
  double parts[3];
  std::size_t pos = eq + 1;
  for (int k = 0; k < 3; ++k) {
    const auto end = k < 2 ? text.find(':', pos) : text.size();
    if (end == std::string::npos) throw ConfigError("sweep must look like PARAM=START:STOP:STEP, got \"" + text + "\"");
    const std::string piece = text.substr(pos, end - pos);
    std::size_t used = 0;
    try {
      parts[k] = std::stod(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != piece.size() || !std::isfinite(parts[k])) throw ConfigError("sweep: bad number \"" + piece + "\"");
    pos = end + 1;
  }
  s.start = parts[0];
  s.stop = parts[1];
  s.step = parts[2];
  if (!(s.step > 0.0)) throw ConfigError("sweep: step must be positive");
  if (!(s.start <= s.stop)) throw ConfigError("sweep: start must not exceed stop");
  if (is_integer_param(s.param) && (s.start != std::round(s.start) || s.step != std::round(s.step))) {
    throw ConfigError("sweep: " + s.param + " takes integer start and step");
  }
  return s;
}

using ScenarioParams = std::map<std::string, double>;

struct ScenarioInfo {
  std::string name;
  /// Parameter reported in the param column when no sweep is given.
  std::string primary;
  ScenarioParams defaults;
};

/// Angles (theta) are in degrees.
inline const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = {
      {"bb84", "q", {{"q", 0.05}}},
      {"six-state", "q", {{"q", 0.05}}},
      {"two-mub", "q", {{"q", 0.05}, {"d", 3}}},
      {"n-mub", "q", {{"q", 0.05}, {"d", 5}, {"n", 3}}},
      {"rotated", "theta", {{"theta", 10}, {"q", 0.01}, {"level", 4}}},
      {"b92", "theta", {{"theta", 90}, {"p", 0.0}}},
      {"mdi-bb84", "q", {{"q", 0.05}, {"pz", 0.99}}},
  };
  return list;
}

inline const ScenarioInfo& scenario_info(const std::string& name) {
  for (const auto& s : scenarios())
    if (s.name == name) return s;
  throw ConfigError("unknown scenario \"" + name + "\"");
}

/// Defaults overridden by `given`; rejects parameters the scenario lacks.
inline ScenarioParams resolve_params(const ScenarioInfo& info, const ScenarioParams& given) {
  ScenarioParams out = info.defaults;
  for (const auto& [k, v] : given) {
    if (!out.contains(k)) throw ConfigError("scenario " + info.name + " has no parameter \"" + k + "\"");
    if (is_integer_param(k) && v != std::round(v)) throw ConfigError("parameter " + k + " must be an integer");
    out[k] = v;
  }
  return out;
}

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

inline KeyRateProblem build_scenario(const std::string& name, const ScenarioParams& given) {
  const ScenarioParams p = resolve_params(scenario_info(name), given);
  auto integer = [&](const char* k) { return static_cast<int>(std::lround(p.at(k))); };
  if (name == "bb84") return build_bb84(p.at("q"));
  if (name == "six-state") return build_six_state(p.at("q"));
  if (name == "two-mub") return build_two_mub(integer("d"), p.at("q"));
  if (name == "n-mub") return build_n_mub(integer("d"), integer("n"), p.at("q"));
  if (name == "rotated") return build_rotated(degrees_to_radians(p.at("theta")), p.at("q"), integer("level"));
  if (name == "b92") return build_b92(degrees_to_radians(p.at("theta")), p.at("p"));
  return build_mdi_bb84(p.at("q"), p.at("pz"));
}

/// Closed-form rate where one is known.
inline std::optional<double> scenario_theory(const std::string& name, const ScenarioParams& given) {
  const ScenarioParams p = resolve_params(scenario_info(name), given);
  if (name == "bb84" || name == "mdi-bb84") return bb84_theory_rate(p.at("q"));
  return std::nullopt;
}

struct RunOptions {
  SolverOptions solver;
  OracleOptions oracle_opts;
  bool oracle = false;
  int jobs = 1;
};

struct Row {
  std::optional<double> param;
  double theta = 0.0;
  double k_dual = 0.0;
  std::optional<double> k_primal;
  std::optional<double> k_theory;
  std::optional<double> p_pass;
  double seconds = 0.0;
};

inline Row solve_row(const KeyRateProblem& pr, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  Row row;
  const DualResult d = maximize_theta(pr, opts.solver);
  row.theta = d.theta;
  row.k_dual = d.key_rate;
  if (pr.postselect) row.p_pass = resolve_p_pass(pr);
  if (opts.oracle) row.k_primal = primal_key_rate(pr, solve_primal(pr, opts.oracle_opts));
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

/// Solves every sweep point (or the single default point when `sweep` is
/// empty). Points run on up to opts.jobs threads; rows keep sweep order. The
/// first failure in sweep order is rethrown.
inline std::vector<Row> run_scenario(const std::string& name, const std::optional<SweepSpec>& sweep, const ScenarioParams& fixed,
                                     const RunOptions& opts) {
  const ScenarioInfo& info = scenario_info(name);
  std::vector<ScenarioParams> points;
  std::vector<double> labels;
  if (sweep) {
    if (!info.defaults.contains(sweep->param)) throw ConfigError("scenario " + name + " has no parameter \"" + sweep->param + "\"");
    if (fixed.contains(sweep->param)) throw ConfigError("parameter " + sweep->param + " is both swept and fixed");
    for (double v : sweep->points()) {
      ScenarioParams p = fixed;
      p[sweep->param] = v;
      points.push_back(std::move(p));
      labels.push_back(v);
    }
  } else {
    points.push_back(fixed);
    labels.push_back(resolve_params(info, fixed).at(info.primary));
  }
  // Build eagerly so parameter errors surface before any solve.
  std::vector<KeyRateProblem> problems;
  for (const auto& p : points) problems.push_back(build_scenario(name, p));

  std::vector<Row> rows(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        rows[i] = solve_row(problems[i], opts);
        rows[i].param = labels[i];
        rows[i].k_theory = scenario_theory(name, points[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(points.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline std::string json_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string("null"); }

}  // namespace detail

inline constexpr const char* kCsvHeader = "param,theta_nats,k_dual_bits,k_primal_bits,k_theory_bits,p_pass,seconds";

/// One CSV line without a trailing newline. With timing off the seconds
/// field is empty so reruns are byte-identical.
inline std::string format_csv_row(const Row& r, bool timing) {
  return detail::format_optional(r.param) + "," + detail::format_number(r.theta) + "," + detail::format_number(r.k_dual) + "," +
         detail::format_optional(r.k_primal) + "," + detail::format_optional(r.k_theory) + "," + detail::format_optional(r.p_pass) +
         "," + (timing ? detail::format_number(r.seconds) : std::string());
}

inline std::string format_jsonl_row(const Row& r, bool timing) {
  return "{\"param\":" + detail::json_optional(r.param) + ",\"theta_nats\":" + detail::format_number(r.theta) +
         ",\"k_dual_bits\":" + detail::format_number(r.k_dual) + ",\"k_primal_bits\":" + detail::json_optional(r.k_primal) +
         ",\"k_theory_bits\":" + detail::json_optional(r.k_theory) + ",\"p_pass\":" + detail::json_optional(r.p_pass) +
         ",\"seconds\":" + (timing ? detail::format_number(r.seconds) : std::string("null")) + "}";
}

}  // namespace qkdrate
