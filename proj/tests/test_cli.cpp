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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qkdrate/config.hpp"
#include "qkdrate/scenario.hpp"

#ifndef QKDRATE_CLI_PATH
#error "QKDRATE_CLI_PATH must point at the qkdrate executable"
#endif
#ifndef QKDRATE_SAMPLES_DIR
#error "QKDRATE_SAMPLES_DIR must point at the samples directory"
#endif

namespace {

using namespace qkdrate;
namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CliRun run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / ("qkdrate_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                    "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".txt");
  const std::string cmd = std::string(QKDRATE_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  fs::remove(out);
  return r;
}

std::string sample(const char* name) { return (fs::path(QKDRATE_SAMPLES_DIR) / name).string(); }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// ---- sweeps ----------------------------------------------------------------

TEST(ParseSweep, Examples) {
  const SweepSpec s = parse_sweep("q=0:0.12:0.01");
  EXPECT_EQ(s.param, "q");
  EXPECT_EQ(s.points().size(), 13u);
  EXPECT_NEAR(s.points().back(), 0.12, 1e-15);
  EXPECT_EQ(parse_sweep("theta=10:170:5").points().size(), 33u);
  EXPECT_EQ(parse_sweep("n=2:6:1").points().size(), 5u);
  EXPECT_EQ(parse_sweep("p=0.05:0.05:0.01").points().size(), 1u);
}

TEST(ParseSweep, Rejections) {
  for (const char* bad : {"q=0:0.1:0", "q=0.2:0.1:0.01", "x=0:1:0.1", "q=0:0.1", "q0:0.1:0.01", "q=a:0.1:0.01", "n=2:6:0.5",
                          "d=2.5:5:1", "q=0:0.1:-0.01", "q=0:0.1:0.01:3"}) {
    EXPECT_THROW(parse_sweep(bad), ConfigError) << bad;
  }
}

TEST(Scenarios, UnknownNameAndParameter) {
  EXPECT_THROW(build_scenario("e91", {}), ConfigError);
  EXPECT_THROW(build_scenario("bb84", {{"theta", 3}}), ConfigError);
  EXPECT_THROW(build_scenario("n-mub", {{"n", 2.5}}), ConfigError);
}

TEST(Scenarios, DefaultsBuild) {
  for (const auto& info : scenarios()) {
    SCOPED_TRACE(info.name);
    const auto pr = build_scenario(info.name, {});
    ASSERT_TRUE(pr.witness.has_value());
    EXPECT_LT(pr.constraints.max_residual(*pr.witness), 1e-10);
  }
}

TEST(RunScenario, BB84SweepMatchesTheory) {
  const auto rows = run_scenario("bb84", parse_sweep("q=0:0.12:0.01"), {}, {});
  ASSERT_EQ(rows.size(), 13u);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.k_theory.has_value());
    EXPECT_NEAR(r.k_dual, *r.k_theory, 1e-3) << "q = " << *r.param;
    EXPECT_GE(r.k_dual, 0.0);
  }
}

TEST(RunScenario, JobsDoNotChangeRows) {
  RunOptions one, two;
  two.jobs = 3;
  const auto a = run_scenario("six-state", parse_sweep("q=0.01:0.09:0.02"), {}, one);
  const auto b = run_scenario("six-state", parse_sweep("q=0.01:0.09:0.02"), {}, two);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(format_csv_row(a[i], false), format_csv_row(b[i], false));
}

TEST(RunScenario, ThirdMubRaisesTheRate) {
  const auto three = run_scenario("n-mub", std::nullopt, {{"d", 5}, {"n", 3}, {"q", 0.05}}, {});
  const auto two = run_scenario("n-mub", std::nullopt, {{"d", 5}, {"n", 2}, {"q", 0.05}}, {});
  ASSERT_EQ(three.size(), 1u);
  EXPECT_GT(three[0].k_dual, two[0].k_dual);
}

TEST(RunScenario, B92NoiselessOptimumIsInterior) {
  const auto rows = run_scenario("b92", parse_sweep("theta=10:170:10"), {{"p", 0.0}}, {});
  const auto best = std::max_element(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.k_dual < b.k_dual; });
  EXPECT_GT(*best->param, 10.0);
  EXPECT_LT(*best->param, 170.0);
  for (const auto& r : rows) EXPECT_TRUE(r.p_pass.has_value());
}

TEST(RunScenario, SweptAndFixedConflict) {
  EXPECT_THROW(run_scenario("bb84", parse_sweep("q=0:0.1:0.05"), {{"q", 0.02}}, {}), ConfigError);
  EXPECT_THROW(run_scenario("bb84", parse_sweep("theta=0:10:5"), {}, {}), ConfigError);
}

TEST(RunScenario, OracleColumnNeverBelowDual) {
  RunOptions o;
  o.oracle = true;
  for (const auto& r : run_scenario("bb84", parse_sweep("q=0.02:0.1:0.04"), {}, o)) {
    ASSERT_TRUE(r.k_primal.has_value());
    EXPECT_LE(r.k_dual, *r.k_primal + 1e-5);
  }
}

// ---- row formatting --------------------------------------------------------

TEST(FormatRow, EmptyOptionals) {
  Row r;
  r.theta = 0.5;
  r.k_dual = 0.25;
  r.seconds = 1.5;
  EXPECT_EQ(format_csv_row(r, false), ",0.5,0.25,,,,");
  EXPECT_EQ(format_csv_row(r, true), ",0.5,0.25,,,,1.5");
  EXPECT_EQ(format_jsonl_row(r, false),
            "{\"param\":null,\"theta_nats\":0.5,\"k_dual_bits\":0.25,\"k_primal_bits\":null,\"k_theory_bits\":null,\"p_pass\":null,"
            "\"seconds\":null}");
}

TEST(FormatRow, HeaderColumns) {
  EXPECT_STREQ(kCsvHeader, "param,theta_nats,k_dual_bits,k_primal_bits,k_theory_bits,p_pass,seconds");
}

// ---- config ----------------------------------------------------------------

TEST(Config, RoundTripKeepsKey) {
  for (const auto& pr : {build_bb84(0.05), build_b92(1.3, 0.02), build_rotated(0.3, 0.01, 3)}) {
    SCOPED_TRACE(pr.label);
    const KeyRateProblem back = problem_from_string(problem_to_json(pr).dump());
    ASSERT_EQ(back.constraints.size(), pr.constraints.size());
    EXPECT_NEAR(maximize_theta(back).key_rate, maximize_theta(pr).key_rate, 1e-9);
  }
}

TEST(Config, MatrixWireFormat) {
  const Matrix m = (Matrix(1, 2) << Complex(1.5, -2), Complex(0, 0.25)).finished();
  const Json j = matrix_to_json(m);
  EXPECT_EQ(j.dump(), R"({"data":[[[1.5,-2.0],[0.0,0.25]]],"dim":[1,2]})");
  EXPECT_EQ(matrix_from_json(j, "$"), m);
}

TEST(Config, SampleMatchesBuiltin) {
  const auto pr = load_problem(sample("bb84_q005.json"));
  EXPECT_NEAR(maximize_theta(pr).key_rate, maximize_theta(build_bb84(0.05)).key_rate, 1e-9);
}

TEST(Config, FanoModeMatchesBinaryEntropy) {
  const auto pr = load_problem(sample("bb84_fano.json"));
  EXPECT_NEAR(pr.hzazb, 0.286396957116, 1e-12);
}

TEST(Config, RedundantConstraintLeavesKey) {
  const auto pr = load_problem(sample("bb84_redundant.json"));
  EXPECT_EQ(pr.constraints.size(), 4u);
  EXPECT_NEAR(maximize_theta(pr).key_rate, maximize_theta(build_bb84(0.05)).key_rate, 1e-6);
}

TEST(Config, InconsistentNormalizationRejected) {
  Json j = problem_to_json(build_bb84(0.05));
  j["constraints"][0]["value"] = 2.0;
  try {
    problem_from_json(j);
    FAIL() << "accepted <1> = 2";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("$.constraints"), std::string::npos) << e.what();
  }
}

TEST(Config, ErrorsNameTheField) {
  const Json good = problem_to_json(build_bb84(0.05));
  auto message = [](const Json& j) {
    try {
      problem_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  Json j = good;
  j.erase("dims");
  EXPECT_NE(message(j).find("$: missing field \"dims\""), std::string::npos);
  j = good;
  j["keymap"][1]["data"][0][1] = {0.5, 0.0};
  EXPECT_NE(message(j).find("$.keymap[1]"), std::string::npos) << message(j);
  j = good;
  j["constraints"][2]["op"]["data"][3][0] = "x";
  EXPECT_NE(message(j).find("$.constraints[2].op.data[3][0]"), std::string::npos) << message(j);
  j = good;
  j["constraints"][1]["value"] = "0.1";
  EXPECT_NE(message(j).find("$.constraints[1].value"), std::string::npos) << message(j);
  j = good;
  j["hzazb"] = {{"mode", "guess"}};
  EXPECT_NE(message(j).find("$.hzazb.mode"), std::string::npos);
  j = good;
  j["dims"] = {2, 3};
  EXPECT_NE(message(j).find("dimension does not match"), std::string::npos) << message(j);
  EXPECT_THROW(problem_from_string("{not json"), ConfigError);
}

// ---- the executable --------------------------------------------------------

TEST(Executable, CsvIsDeterministic) {
  const std::string args = "--scenario rotated --sweep theta=0:20:10 --no-timing --seed 5";
  const CliRun a = run_cli(args), b = run_cli(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  const auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[0], kCsvHeader);
  EXPECT_EQ(ls[1].substr(0, 2), "0,");
  EXPECT_EQ(ls[1].back(), ',');
}

TEST(Executable, JsonLines) {
  const CliRun r = run_cli("--scenario bb84 --sweep q=0:0.1:0.05 --format jsonl");
  ASSERT_EQ(r.code, 0);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  for (const auto& l : ls) {
    const Json j = Json::parse(l);
    EXPECT_NEAR(j["k_dual_bits"].get<double>(), j["k_theory_bits"].get<double>(), 1e-3);
    EXPECT_TRUE(j["seconds"].is_number());
  }
}

TEST(Executable, DumpedConfigSolvesToTheSameRow) {
  const fs::path cfg = fs::temp_directory_path() / "qkdrate_dump_test.json";
  const CliRun dump = run_cli("--scenario six-state --fixed q=0.03 --dump-config --out " + cfg.string());
  ASSERT_EQ(dump.code, 0);
  const CliRun a = run_cli("--config " + cfg.string() + " --no-timing");
  const CliRun b = run_cli("--scenario six-state --fixed q=0.03 --no-timing");
  fs::remove(cfg);
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  // Same theta and key; the config row has no param column.
  EXPECT_EQ(lines(a.out)[1], lines(b.out)[1].substr(lines(b.out)[1].find(',')));
}

TEST(Executable, ConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli("--scenario nope").code, 2);
  EXPECT_EQ(run_cli("--scenario bb84 --sweep q=0:0.1:0").code, 2);
  EXPECT_EQ(run_cli("--scenario bb84 --fixed q=abc").code, 2);
  EXPECT_EQ(run_cli("--scenario bb84 --fixed q=0.7").code, 2);
  EXPECT_EQ(run_cli("--scenario bb84 --format xml").code, 2);
  EXPECT_EQ(run_cli("--config /nonexistent/problem.json").code, 2);
  EXPECT_EQ(run_cli("").code, 2);
}

TEST(Executable, HelpExitsZero) { EXPECT_EQ(run_cli("--help").code, 0); }

}  // namespace
