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

#include "imprintlab/measurement.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "imprintlab/linalg.h"

namespace imprintlab {

MeasurementKind ParseMeasurementKind(const std::string& name) {
  if (name == "mean") return MeasurementKind::kMean;
  if (name == "dct") return MeasurementKind::kDct;
  if (name == "random") return MeasurementKind::kRandomGaussian;
  throw std::invalid_argument("unknown measurement kind '" + name + "'");
}

const char* MeasurementKindName(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::kMean:
      return "mean";
    case MeasurementKind::kDct:
      return "dct";
    case MeasurementKind::kRandomGaussian:
      return "random";
  }
  return "?";
}

Measurement Measurement::Build(MeasurementKind kind, std::size_t m, double c0,
                               RngStream* stream, std::size_t freq) {
  if (m == 0) throw std::invalid_argument("measurement dimension must be positive");
  if (!(c0 > 0.0) || !std::isfinite(c0)) {
    throw std::invalid_argument("measurement scale c0 must be positive");
  }
  switch (kind) {
    case MeasurementKind::kMean:
      return Measurement(kind, TensorD::Vector(std::vector<double>(m, 1.0 / m)), c0, 0);
    case MeasurementKind::kDct:
      if (freq >= m) {
        throw std::invalid_argument("dct frequency " + std::to_string(freq) +
                                    " must be below dimension " + std::to_string(m));
      }
      return Measurement(kind, DctRow(m, freq), c0, freq);
    case MeasurementKind::kRandomGaussian: {
      if (stream == nullptr) {
        throw std::invalid_argument("random measurement requires an rng stream");
      }
      // Entry variance 1/sqrt(m).
      const double sd = std::pow(static_cast<double>(m), -0.25);
      std::vector<double> w(m);
      for (auto& v : w) v = sd * stream->Normal();
      return Measurement(kind, TensorD::Vector(std::move(w)), c0, 0);
    }
  }
  throw std::invalid_argument("unhandled measurement kind");
}

Measurement Measurement::WithScale(double c0) const {
  if (!(c0 > 0.0)) throw std::invalid_argument("measurement scale c0 must be positive");
  return Measurement(kind_, weights_, c0, freq_);
}

DistributionKind ParseDistributionKind(const std::string& name) {
  if (name == "normal") return DistributionKind::kNormal;
  if (name == "laplace") return DistributionKind::kLaplace;
  if (name == "empirical") return DistributionKind::kEmpirical;
  throw std::invalid_argument("unknown distribution kind '" + name + "'");
}

ScalarDistribution AssumedDistribution(const Measurement& h, const DataModelConfig& config) {
  switch (config.kind) {
    case DistributionKind::kNormal:
      return ScalarDistribution::Normal(config.location.value_or(0.0),
                                        config.scale.value_or(1.0));
    case DistributionKind::kLaplace:
      return ScalarDistribution::Laplace(config.location.value_or(0.0),
                                         config.scale.value_or(1.0 / std::numbers::sqrt2));
    case DistributionKind::kEmpirical: {
      if (!config.surrogate.has_value()) {
        throw std::invalid_argument("empirical distribution requires surrogate data");
      }
      const Measurement unit = h.WithScale(1.0);
      return ScalarDistribution::Empirical(unit.MeasureRows(*config.surrogate));
    }
  }
  throw std::invalid_argument("unhandled distribution kind");
}

}  // namespace imprintlab
