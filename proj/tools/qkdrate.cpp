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

// Sweeps a built-in protocol (or solves a custom problem) and prints one row
// per point.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qkdrate/config.hpp"
#include "qkdrate/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;

qkdrate::ScenarioParams parse_fixed(const std::vector<std::string>& items) {
  qkdrate::ScenarioParams out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw qkdrate::ConfigError("--fixed expects NAME=VALUE, got \"" + s + "\"");
    const std::string value = s.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw qkdrate::ConfigError("--fixed: bad number \"" + value + "\"");
    out[s.substr(0, eq)] = v;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lower bounds on asymptotic QKD key rates"};
  std::string scenario, sweep_text, out_path, format = "csv", config_path;
  std::vector<std::string> fixed_items;
  bool oracle = false, dump_config = false, no_timing = false;
  int starts = 8, jobs = 1;
  std::uint64_t seed = qkdrate::SolverOptions{}.seed;
  double tol = qkdrate::SolverOptions{}.tol;

  app.add_option("--scenario", scenario, "bb84, six-state, two-mub, n-mub, rotated, b92 or mdi-bb84");
  app.add_option("--sweep", sweep_text, "PARAM=START:STOP:STEP with PARAM in q, theta, p, n, d (theta in degrees)");
  app.add_option("--fixed", fixed_items, "NAME=VALUE scenario parameter (repeatable)");
  app.add_flag("--oracle", oracle, "Also run the primal oracle");
  app.add_option("--starts", starts, "Dual starting points")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for the random starting points");
  app.add_option("--tol", tol, "Dual stage stopping tolerance (nats)")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Sweep points solved concurrently")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "Output file (default stdout)");
  app.add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  app.add_option("--config", config_path, "Custom problem JSON file");
  app.add_flag("--dump-config", dump_config, "Print the scenario's problem as config JSON and exit");
  app.add_flag("--no-timing", no_timing, "Leave the seconds column empty");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "error: cannot open " << out_path << "\n";
      return kExitConfig;
    }
    out = &file;
  }

  qkdrate::RunOptions opts;
  opts.solver.starts = starts;
  opts.solver.seed = seed;
  opts.solver.tol = tol;
  opts.oracle = oracle;
  opts.jobs = jobs;

  std::vector<qkdrate::Row> rows;
  try {
    if (scenario.empty() == config_path.empty()) throw qkdrate::ConfigError("give exactly one of --scenario and --config");
    if (!config_path.empty()) {
      if (!sweep_text.empty() || !fixed_items.empty()) throw qkdrate::ConfigError("--sweep and --fixed need --scenario");
      const qkdrate::KeyRateProblem pr = qkdrate::load_problem(config_path);
      if (dump_config) {
        *out << qkdrate::problem_to_json(pr).dump(2) << "\n";
        return 0;
      }
      rows.push_back(qkdrate::solve_row(pr, opts));
    } else {
      const qkdrate::ScenarioParams fixed = parse_fixed(fixed_items);
      if (dump_config) {
        if (!sweep_text.empty()) throw qkdrate::ConfigError("--dump-config takes a single point, not a sweep");
        *out << qkdrate::problem_to_json(qkdrate::build_scenario(scenario, fixed)).dump(2) << "\n";
        return 0;
      }
      std::optional<qkdrate::SweepSpec> sweep;
      if (!sweep_text.empty()) sweep = qkdrate::parse_sweep(sweep_text);
      rows = qkdrate::run_scenario(scenario, sweep, fixed, opts);
    }
  } catch (const qkdrate::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const qkdrate::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const bool timing = !no_timing;
  if (format == "csv") {
    *out << qkdrate::kCsvHeader << "\n";
    for (const auto& r : rows) *out << qkdrate::format_csv_row(r, timing) << "\n";
  } else {
    for (const auto& r : rows) *out << qkdrate::format_jsonl_row(r, timing) << "\n";
  }
  return 0;
}
