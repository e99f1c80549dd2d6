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

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "imprintlab/scenario.h"

namespace imprintlab {
namespace {

using nlohmann::json;

json SmallDoc() {
  return json::parse(R"({
    "id": "small",
    "seed": 7,
    "trials": 2,
    "dataset": {"kind": "synthetic_gaussian", "m": 8, "n": 6, "classes": 3},
    "model": {
      "kind": "imprinted",
      "imprint": {"variant": "relu", "bins": 24, "measurement": "mean",
                  "assumed": {"kind": "normal", "location": 0.0, "scale": 0.35}},
      "head": {"classes": 3, "init": "alternating", "init_scale": 0.01}
    },
    "federation": {"protocol": "fedsgd", "users": 1},
    "metrics": {"pool": 20},
    "check": {"exact_matches_oracle": true}
  })");
}

std::string ErrorPath(const json& doc) {
  try {
    ParseScenario(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

TEST(ScenarioConfigTest, ParsesSmallScenario) {
  const auto cfg = ParseScenario(SmallDoc());
  EXPECT_EQ(cfg.id, "small");
  EXPECT_EQ(cfg.model.imprint.bins, 24u);
  EXPECT_EQ(cfg.metrics.pool, 20u);
  EXPECT_TRUE(cfg.check.exact_matches_oracle);
}

TEST(ScenarioConfigTest, ErrorsNameTheField) {
  auto doc = SmallDoc();
  doc["model"]["imprint"]["bins"] = 1;
  EXPECT_EQ(ErrorPath(doc), "model.imprint.bins");
  doc = SmallDoc();
  doc["model"]["imprint"]["c0"] = -1.0;
  EXPECT_EQ(ErrorPath(doc), "model.imprint.c0");
  doc = SmallDoc();
  doc["dataset"]["m"] = "eight";
  EXPECT_EQ(ErrorPath(doc), "dataset.m");
  doc = SmallDoc();
  doc["federation"]["users"] = 7;
  EXPECT_EQ(ErrorPath(doc), "federation.users");
  doc = SmallDoc();
  doc["federation"]["steps"] = 2;
  EXPECT_EQ(ErrorPath(doc), "federation.steps");
  doc = SmallDoc();
  doc["defense"] = {{"noise", "laplace"}, {"sigma", -0.1}};
  EXPECT_EQ(ErrorPath(doc), "defense.sigma");
  doc = SmallDoc();
  doc.erase("dataset");
  EXPECT_EQ(ErrorPath(doc), "dataset");
}

TEST(ScenarioConfigTest, RejectsUnknownKeys) {
  auto doc = SmallDoc();
  doc["model"]["imprint"]["binz"] = 3;
  EXPECT_EQ(ErrorPath(doc), "model.imprint.binz");
  doc = SmallDoc();
  doc["extra"] = true;
  EXPECT_EQ(ErrorPath(doc), "extra");
}

TEST(ScenarioConfigTest, BundledScenariosLoad) {
  for (const auto& entry : std::filesystem::directory_iterator(IMPRINTLAB_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(LoadScenario(entry.path())) << entry.path();
  }
  EXPECT_THROW(LoadScenario("/nonexistent/x.json"), ConfigError);
}

TEST(ScenarioRunTest, ReportEchoesConfigAndIsDeterministic) {
  const auto cfg = ParseScenario(SmallDoc());
  const auto a = RunScenario(cfg, {.f64 = true, .jobs = 1, .seed_override = std::nullopt});
  const auto b = RunScenario(cfg, {.f64 = true, .jobs = 2, .seed_override = std::nullopt});
  EXPECT_EQ(a.at("config").dump(), SmallDoc().dump());
  EXPECT_EQ(a.at("precision"), "float64");
  EXPECT_EQ(a.at("trials").size(), 2u);
  EXPECT_TRUE(a.contains("timing"));
  EXPECT_FALSE(StripTiming(a).contains("timing"));
  EXPECT_EQ(StripTiming(a).dump(), StripTiming(b).dump());
  const auto checks = EvaluateChecks(cfg, a);
  ASSERT_EQ(checks.size(), 1u);
  EXPECT_TRUE(checks[0].passed) << checks[0].detail;
  const auto other = RunScenario(cfg, {.f64 = true, .jobs = 1, .seed_override = 8});
  EXPECT_NE(StripTiming(a).at("trials").dump(), StripTiming(other).at("trials").dump());
}

TEST(ScenarioRunTest, OccupancyCsvHasOneRowPerBin) {
  const auto cfg = ParseScenario(SmallDoc());
  const auto trial = RunTrial(cfg, 0, true);
  const std::string csv = OccupancyCsv(trial);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);
}

TEST(SweepTest, ValuesApplyAndCsvHasRows) {
  const auto cfg = ParseScenario(SmallDoc());
  EXPECT_EQ(WithSweepValue(cfg, SweepAxis::kBins, 40).model.imprint.bins, 40u);
  EXPECT_EQ(WithSweepValue(cfg, SweepAxis::kBatch, 5).dataset.n, 5u);
  const auto noisy = WithSweepValue(cfg, SweepAxis::kSigma, 0.01);
  EXPECT_EQ(noisy.defense.noise, NoiseKind::kLaplace);
  EXPECT_DOUBLE_EQ(noisy.defense.sigma, 0.01);
  EXPECT_THROW(WithSweepValue(cfg, SweepAxis::kBins, 2.5), ConfigError);
  EXPECT_THROW(ParseSweepAxis("color"), std::invalid_argument);

  const std::string csv = Sweep(cfg, SweepAxis::kBins, {8, 64}, {.f64 = true, .jobs = 2, .seed_override = std::nullopt});
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("value,n,k,", 0), 0u);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

}  // namespace
}  // namespace imprintlab
