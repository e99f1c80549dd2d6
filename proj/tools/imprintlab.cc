/*
 * Copyright 2026 The imprintlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imprintlab/dataio.h"
#include "imprintlab/scenario.h"
#include "imprintlab/theory.h"

namespace fs = std::filesystem;
using namespace imprintlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheck = 4;

const std::vector<std::string> kCheckScenarios = {"fullbatch64", "oneshot", "fedavg8x8"};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool f64 = false;
  std::size_t jobs = 1;

  RunOptions Options() const { return {.f64 = f64, .jobs = jobs, .seed_override = seed}; }
};

void AddCommon(CLI::App* cmd, Common* c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c->config, "scenario JSON file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c->seed, "override the master seed");
  cmd->add_option("--out", c->out, "output directory");
  cmd->add_flag("--f64", c->f64, "run in 64-bit precision");
  cmd->add_option("--jobs", c->jobs, "worker threads")->check(CLI::PositiveNumber);
}

fs::path OutDir(const Common& c, const std::string& id) {
  return c.out.empty() ? fs::path("out") / id : fs::path(c.out);
}

std::string Fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void PrintSummary(const nlohmann::ordered_json& report) {
  const auto& s = report.at("summary");
  std::cout << "scenario " << report.at("scenario").get<std::string>() << " seed "
            << report.at("seed").get<std::uint64_t>() << " ("
            << report.at("precision").get<std::string>() << ", " << s.at("trials") << " trials)\n";
  std::cout << "  mean exact count     " << s.at("mean_exact_count").dump() << "\n";
  std::cout << "  mean singletons      " << s.at("mean_singletons").dump() << "\n";
  std::cout << "  exact == oracle      " << s.at("exact_matches_oracle_trials") << "/"
            << s.at("trials") << "\n";
  std::cout << "  mean psnr            " << s.at("mean_psnr").dump() << "\n";
  std::cout << "  mean iip             " << s.at("mean_iip").dump() << "\n";
  if (s.contains("success_rate")) {
    std::cout << "  one-shot success     " << s.at("success_rate").dump() << "\n";
  }
  if (s.contains("token_accuracy")) {
    std::cout << "  token accuracy       " << s.at("token_accuracy").dump() << "\n";
    std::cout << "  nearest-row accuracy " << s.at("nearest_token_accuracy").dump() << "\n";
  }
}

void WriteRunOutputs(const ScenarioConfig& cfg, const nlohmann::ordered_json& report,
                     const fs::path& dir) {
  SaveJson(report, dir / "report.json");
  SaveText(OccupancyCsv(report.at("trials").at(0)), dir / "occupancy.csv");
  const auto& th = report.at("theory");
  const std::size_t n = th.at("n").get<std::size_t>();
  if (th.contains("k")) {
    std::vector<std::size_t> bins;
    for (std::size_t k = 8; k <= 1024; k *= 2) bins.push_back(k);
    SaveText(RecoveryCurveCsv(RecoveryCurve(n, bins)), dir / "recovery_curve.csv");
  }
  if (th.contains("mass")) {
    SaveText(OneShotCurveCsv(n, 1e-2 / static_cast<double>(n),
                             std::min(0.5, 1e2 / static_cast<double>(n)), 200),
             dir / "one_shot_curve.csv");
  }
  (void)cfg;
}

int Run(const Common& c) {
  const ScenarioConfig cfg = LoadScenario(c.config);
  const auto report = RunScenario(cfg, c.Options());
  const fs::path dir = OutDir(c, cfg.id);
  WriteRunOutputs(cfg, report, dir);
  PrintSummary(report);
  std::cout << "  report               " << (dir / "report.json").string() << "\n";
  return kExitOk;
}

std::vector<double> ParseValues(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("--values", "bad number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values", "no values given");
  return out;
}

int SweepCmd(const Common& c, const std::string& axis, const std::string& values) {
  ScenarioConfig cfg = LoadScenario(c.config);
  SweepAxis parsed;
  try {
    parsed = ParseSweepAxis(axis);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--axis", e.what());
  }
  const std::string csv = Sweep(cfg, parsed, ParseValues(values), c.Options());
  const fs::path path = OutDir(c, cfg.id) / ("sweep_" + axis + ".csv");
  SaveText(csv, path);
  std::cout << csv << "written " << path.string() << "\n";
  return kExitOk;
}

struct PlanArgs {
  std::size_t n = 0;
  std::optional<std::size_t> k;
  std::optional<double> p;
  std::size_t m = 0;
  std::uint64_t base = 0;
  std::size_t decoys = 0;
};

int Plan(const PlanArgs& a) {
  if (a.n == 0) throw ConfigError("--n", "batch size must be >= 1");
  if (a.k.has_value() == a.p.has_value()) throw ConfigError("--k", "give exactly one of --k, --p");
  std::cout << "batch size n               " << a.n << "\n";
  int status = kExitOk;
  std::size_t rows = 2;
  if (a.k) {
    rows = *a.k;
    if (rows == 0) throw ConfigError("--k", "bins must be >= 1");
    std::cout << "bins k                     " << rows << "\n";
    try {
      const double v = ExpectedRecovery(a.n, rows);
      std::cout << "expected (composition)     " << Fixed(v) << "  ("
                << Fixed(100.0 * v / static_cast<double>(a.n), 2) << "% of batch)\n";
    } catch (const TheoryDomainError& e) {
      std::cerr << "composition model: " << e.what() << "\n";
      std::cout << "expected (composition)     undefined\n";
    }
    const double iid = IidSingletonExpectation(a.n, rows);
    std::cout << "expected (iid)             " << Fixed(iid) << "  ("
              << Fixed(100.0 * iid / static_cast<double>(a.n), 2) << "% of batch)\n";
    std::cout << "one-shot optimum           p=" << OneShotArgmax(a.n)
              << " success=" << Fixed(OneShotMax(a.n)) << "\n";
  } else {
    if (!(*a.p > 0.0 && *a.p < 1.0)) throw ConfigError("--p", "mass must lie in (0, 1)");
    std::cout << "one-shot mass p            " << *a.p << "\n";
    std::cout << "one-shot success           " << Fixed(OneShotSuccess(a.n, *a.p)) << "\n";
    std::cout << "one-shot optimum           p=" << OneShotArgmax(a.n)
              << " success=" << Fixed(OneShotMax(a.n)) << "\n";
  }
  if (a.m > 0) {
    const auto o = Overhead(a.m, rows, a.decoys, 0, a.base);
    std::cout << "added weights              " << o.weights << "\n";
    std::cout << "added biases               " << o.biases << "\n";
    std::cout << "added parameters           " << o.total;
    if (a.base > 0) std::cout << "  (" << Fixed(100.0 * o.relative, 2) << "% of " << a.base << ")";
    std::cout << "\n";
  }
  return status;
}

int Check(const Common& c, const std::string& scenario_dir) {
  bool all = true;
  for (const auto& name : kCheckScenarios) {
    const fs::path path = fs::path(scenario_dir) / (name + ".json");
    const ScenarioConfig cfg = LoadScenario(path);
    const auto report = RunScenario(cfg, c.Options());
    if (!c.out.empty()) WriteRunOutputs(cfg, report, fs::path(c.out) / cfg.id);
    for (const auto& outcome : EvaluateChecks(cfg, report)) {
      all = all && outcome.passed;
      std::cout << (outcome.passed ? "PASS " : "FAIL ") << cfg.id << ": " << outcome.name << " ("
                << outcome.detail << ")\n";
    }
  }
  return all ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imprint-module attack lab"};
  app.require_subcommand(1);

  Common run_args, sweep_args, check_args;
  auto* run = app.add_subcommand("run", "run one scenario and write its report");
  AddCommon(run, &run_args, true);

  auto* sweep = app.add_subcommand("sweep", "run a scenario across one axis");
  AddCommon(sweep, &sweep_args, true);
  std::string axis, values;
  sweep->add_option("--axis", axis, "bins | batch | sigma | placement")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  auto* plan = app.add_subcommand("plan", "expected recovery, one-shot odds and overhead");
  PlanArgs plan_args;
  plan->add_option("--n", plan_args.n, "batch size")->required();
  plan->add_option("--k", plan_args.k, "bins");
  plan->add_option("--p", plan_args.p, "one-shot mass");
  plan->add_option("--m", plan_args.m, "input dimension");
  plan->add_option("--base", plan_args.base, "base model parameter count");
  plan->add_option("--decoys", plan_args.decoys, "decoy rows");

  auto* check = app.add_subcommand("check", "run the bundled acceptance scenarios");
  AddCommon(check, &check_args, false);
  std::string scenario_dir = IMPRINTLAB_SCENARIO_DIR;
  check->add_option("--scenario-dir", scenario_dir, "directory with bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return Run(run_args);
    if (*sweep) return SweepCmd(sweep_args, axis, values);
    if (*plan) return Plan(plan_args);
    if (*check) return Check(check_args, scenario_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
