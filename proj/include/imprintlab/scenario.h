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

#ifndef IMPRINTLAB_SCENARIO_H_
#define IMPRINTLAB_SCENARIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imprintlab/dataio.h"
#include "imprintlab/defense.h"
#include "imprintlab/federation.h"
#include "imprintlab/imprint.h"
#include "imprintlab/measurement.h"
#include "imprintlab/model.h"

namespace imprintlab {

// Invalid scenario configuration. `path` is the dotted field path at fault.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::invalid_argument(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Placement { kBinned, kOneShot };

struct ImprintSpec {
  ImprintVariant variant = ImprintVariant::kRelu;
  std::size_t bins = 0;
  std::size_t decoys = 0;
  std::optional<std::uint64_t> perm_seed;
  MeasurementKind measurement = MeasurementKind::kMean;
  std::size_t freq = 0;
  double c0 = 1.0;
  double p_min = 1e-6;
  DataModelConfig assumed;
  std::size_t surrogate_rows = 10000;    // generated surrogate for an empirical fit
  std::filesystem::path surrogate_path;  // or surrogate rows from a csv / raw tensor
  double tau_rel = 1e-9;                 // empty-bin threshold
  Placement placement = Placement::kBinned;
  std::optional<double> mass;   // one-shot; defaults to 1 / batch size
  std::optional<double> lower;  // one-shot interval start
};

struct ModelSpec {
  ModelKind kind = ModelKind::kImprinted;
  std::vector<FrontStage> front;
  ImprintSpec imprint;
  BridgeConfig bridge;
  HeadConfig head;
  LogisticInit logistic;
  std::size_t logistic_classes = 0;
};

enum class Protocol { kFedSgd, kFedAvg };

struct FederationSpec {
  Protocol protocol = Protocol::kFedSgd;
  std::size_t users = 1;
  double lr = 1e-4;
  std::size_t steps = 1;
};

struct MetricsSpec {
  std::size_t pool = 1000;
  double rel_tol = 1e-4;
  std::optional<double> peak;  // defaults to the dynamic range of the truth
};

// Thresholds evaluated by `check`; unset fields are not checked.
struct CheckSpec {
  bool exact_matches_oracle = false;
  std::optional<double> min_mean_psnr;
  std::optional<double> min_iip;
  std::optional<double> success_target;
  double success_tolerance = 0.0;
};

struct ScenarioConfig {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  DatasetSpec dataset;
  ModelSpec model;
  FederationSpec federation;
  DefenseConfig defense;
  MetricsSpec metrics;
  CheckSpec check;
  nlohmann::json source;  // canonical echo of the input document
  std::filesystem::path base_dir;  // relative paths resolve against this
};

// Validates everything before any compute; throws ConfigError.
ScenarioConfig ParseScenario(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir = {});
ScenarioConfig LoadScenario(const std::filesystem::path& path);

struct RunOptions {
  bool f64 = false;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed_override;
};

// One trial of the pipeline, as JSON. Every random draw derives from
// (seed, trial), so trials may run in any order.
nlohmann::ordered_json RunTrial(const ScenarioConfig& cfg, std::size_t trial, bool f64);

// All trials, a summary and the theory predictions.
nlohmann::ordered_json RunScenario(const ScenarioConfig& cfg, const RunOptions& options);

// The report without its "timing" member.
nlohmann::ordered_json StripTiming(nlohmann::ordered_json report);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckOutcome> EvaluateChecks(const ScenarioConfig& cfg,
                                         const nlohmann::ordered_json& report);

enum class SweepAxis { kBins, kBatch, kSigma, kPlacement };

SweepAxis ParseSweepAxis(const std::string& name);

// Applies one sweep value to a copy of the scenario.
ScenarioConfig WithSweepValue(const ScenarioConfig& cfg, SweepAxis axis, double value);

// One CSV row per value: predicted and measured recovery.
std::string Sweep(const ScenarioConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                  const RunOptions& options);

std::string OccupancyCsv(const nlohmann::ordered_json& trial);

}  // namespace imprintlab

#endif  // IMPRINTLAB_SCENARIO_H_
