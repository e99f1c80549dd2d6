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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/distributions.h"
#include "imprintlab/linalg.h"
#include "imprintlab/measurement.h"
#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

TEST(MeasurementTest, MeanWeights) {
  const auto h = Measurement::Build(MeasurementKind::kMean, 4, 1.0, nullptr);
  for (double w : h.weights().data()) EXPECT_DOUBLE_EQ(w, 0.25);
  const std::vector<double> c(4, 3.5);
  EXPECT_DOUBLE_EQ(h.Measure<double>(c), 3.5);
  EXPECT_DOUBLE_EQ(h.Measure<double>(std::vector<double>(4, 0.0)), 0.0);
}

TEST(MeasurementTest, DctUsesBasisRow) {
  const std::size_t m = 3 * 32 * 32;
  const auto h = Measurement::Build(MeasurementKind::kDct, m, 1.0, nullptr, 32);
  EXPECT_EQ(h.weights(), DctRow(m, 32));
  EXPECT_THROW(Measurement::Build(MeasurementKind::kDct, 8, 1.0, nullptr, 8),
               std::invalid_argument);
}

TEST(MeasurementTest, RandomGaussianEntryVariance) {
  const std::size_t m = 10000;
  RngStream s(41, 0);
  const auto h = Measurement::Build(MeasurementKind::kRandomGaussian, m, 1.0, &s);
  double mean = 0, var = 0;
  for (double w : h.weights().data()) mean += w;
  mean /= m;
  for (double w : h.weights().data()) var += (w - mean) * (w - mean);
  var /= m - 1;
  EXPECT_NEAR(var, 1.0 / std::sqrt(static_cast<double>(m)), 0.2 / std::sqrt(double(m)));
  EXPECT_THROW(Measurement::Build(MeasurementKind::kRandomGaussian, m, 1.0, nullptr),
               std::invalid_argument);
}

TEST(MeasurementTest, MeanOfGaussianRowsHasSdOneOverSqrtM) {
  const std::size_t m = 64;
  RngStream s(42, 0);
  const auto x = RandGaussian<double>(s, {1000, m});
  const auto h = Measurement::Build(MeasurementKind::kMean, m, 1.0, nullptr);
  const auto v = h.MeasureRows(x);
  double mean = 0, var = 0;
  for (double a : v) mean += a;
  mean /= v.size();
  for (double a : v) var += (a - mean) * (a - mean);
  var /= v.size() - 1;
  EXPECT_NEAR(std::sqrt(var), 1.0 / std::sqrt(double(m)), 0.1 / std::sqrt(double(m)));
}

TEST(MeasurementTest, LinearityAndScaling) {
  RngStream s(43, 0);
  const std::size_t m = 32;
  for (auto kind : {MeasurementKind::kMean, MeasurementKind::kDct,
                    MeasurementKind::kRandomGaussian}) {
    const auto h = Measurement::Build(kind, m, 1.0, &s, 3);
    const auto x = RandGaussian<double>(s, {m});
    const auto y = RandGaussian<double>(s, {m});
    const double a = 1.7, b = -0.4;
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = a * x[i] + b * y[i];
    const double lhs = h.Measure<double>(z);
    const double rhs = a * h.Measure<double>(x.data()) + b * h.Measure<double>(y.data());
    EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(rhs)));
    for (double gamma : {0.001, 3.0, 100.0}) {
      EXPECT_EQ(h.WithScale(gamma).Measure<double>(x.data()),
                gamma * h.Measure<double>(x.data()));
    }
  }
}

TEST(MeasurementTest, ShapeMismatchAndBadScale) {
  const auto h = Measurement::Build(MeasurementKind::kMean, 4, 1.0, nullptr);
  EXPECT_THROW(h.Measure<double>(std::vector<double>(3)), ShapeError);
  EXPECT_THROW(Measurement::Build(MeasurementKind::kMean, 4, 0.0, nullptr),
               std::invalid_argument);
}

TEST(AssumedDistributionTest, Defaults) {
  const auto h = Measurement::Build(MeasurementKind::kMean, 4, 1.0, nullptr);
  const auto normal = AssumedDistribution(h, {});
  ASSERT_TRUE(normal.is_normal());
  EXPECT_EQ(std::get<NormalParams>(normal.params()).mean, 0.0);
  EXPECT_EQ(std::get<NormalParams>(normal.params()).sd, 1.0);
  DataModelConfig lap;
  lap.kind = DistributionKind::kLaplace;
  const auto l = AssumedDistribution(h, lap);
  ASSERT_TRUE(l.is_laplace());
  EXPECT_DOUBLE_EQ(std::get<LaplaceParams>(l.params()).scale, 1 / std::numbers::sqrt2);
}

TEST(AssumedDistributionTest, EmpiricalFromSurrogate) {
  const std::size_t m = 16;
  RngStream s(44, 0);
  const auto h = Measurement::Build(MeasurementKind::kMean, m, 5.0, nullptr);
  DataModelConfig cfg;
  cfg.kind = DistributionKind::kEmpirical;
  EXPECT_THROW(AssumedDistribution(h, cfg), std::invalid_argument);
  cfg.surrogate = RandGaussian<double>(s, {10000, m});
  const auto d = AssumedDistribution(h, cfg);
  ASSERT_TRUE(d.is_empirical());
  const auto& sorted = std::get<EmpiricalParams>(d.params()).sorted;
  EXPECT_EQ(sorted.size(), 10000u);
  EXPECT_TRUE(std::is_sorted(sorted.begin(), sorted.end()));
  // Boundaries refer to the unit-scale measurement.
  const auto reference = ScalarDistribution::Normal(0, 1 / std::sqrt(double(m)));
  double worst = 0.0;
  for (double x : sorted) worst = std::max(worst, std::abs(d.Cdf(x) - reference.Cdf(x)));
  EXPECT_LT(worst, 0.03);
}

}  // namespace
}  // namespace imprintlab
