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

#ifndef IMPRINTLAB_MEASUREMENT_H_
#define IMPRINTLAB_MEASUREMENT_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imprintlab/distributions.h"
#include "imprintlab/rng.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

enum class MeasurementKind { kMean, kDct, kRandomGaussian };

MeasurementKind ParseMeasurementKind(const std::string& name);
const char* MeasurementKindName(MeasurementKind kind);

// Linear functional h(x) = c0 * <weights, x> used to order user data.
class Measurement {
 public:
  // freq is only read for kDct; stream only for kRandomGaussian.
  static Measurement Build(MeasurementKind kind, std::size_t m, double c0,
                           RngStream* stream, std::size_t freq = 0);

  MeasurementKind kind() const { return kind_; }
  std::size_t dim() const { return weights_.size(); }
  double c0() const { return c0_; }
  std::size_t freq() const { return freq_; }
  const TensorD& weights() const { return weights_; }

  // Same functional with a different scale.
  Measurement WithScale(double c0) const;

  template <typename T>
  double Measure(std::span<const T> x) const {
    if (x.size() != weights_.size()) {
      throw ShapeError("measure: input length " + std::to_string(x.size()) +
                       " vs measurement dim " + std::to_string(weights_.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += weights_[i] * static_cast<double>(x[i]);
    }
    return c0_ * acc;
  }

  // h applied to every row of a [n x m] matrix.
  template <typename T>
  std::vector<double> MeasureRows(const Tensor<T>& rows) const {
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = Measure<T>(rows.row(r));
    return out;
  }

 private:
  Measurement(MeasurementKind kind, TensorD weights, double c0, std::size_t freq)
      : kind_(kind), weights_(std::move(weights)), c0_(c0), freq_(freq) {}

  MeasurementKind kind_;
  TensorD weights_;
  double c0_;
  std::size_t freq_;
};

enum class DistributionKind { kNormal, kLaplace, kEmpirical };

// What the attacker assumes about h(x) on user data.
struct DataModelConfig {
  DistributionKind kind = DistributionKind::kNormal;
  std::optional<double> location;  // defaults: 0
  std::optional<double> scale;     // defaults: 1 (Normal), 1/sqrt(2) (Laplace)
  // Surrogate rows [n x m] for the empirical kind; measured with h (unit
  // scale) and fitted.
  std::optional<TensorD> surrogate;
};

DistributionKind ParseDistributionKind(const std::string& name);

// The distribution whose quantiles become bin boundaries. Boundaries always
// refer to the unit-scale measurement; c0 acts as a gain inside the imprint.
ScalarDistribution AssumedDistribution(const Measurement& h, const DataModelConfig& config);

}  // namespace imprintlab

#endif  // IMPRINTLAB_MEASUREMENT_H_
