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
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/distributions.h"
#include "imprintlab/federation.h"
#include "imprintlab/imprint.h"
#include "imprintlab/linalg.h"
#include "imprintlab/measurement.h"
#include "imprintlab/model.h"
#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

template <typename T>
ModelGraph<T> Imprinted(std::size_t m, std::size_t k, ImprintVariant variant, RngStream& s) {
  const auto h = Measurement::Build(MeasurementKind::kMean, m, 1.0, nullptr);
  const auto layout = MakeLayout(ScalarDistribution::Normal(0, 1 / std::sqrt(double(m))), k);
  const auto module =
      variant == ImprintVariant::kRelu ? BuildRelu(layout, h) : BuildHardThreshold(layout, h);
  return MakeImprintedModel<T>(m, {}, module, {}, {.classes = 5, .init_scale = 1.0}, s);
}

template <typename T>
Batch<T> Data(RngStream& s, std::size_t n, std::size_t m) {
  Batch<T> b{RandGaussian<T>(s, {n, m}), {}};
  for (std::size_t t = 0; t < n; ++t) b.labels.push_back(static_cast<int>(s.UniformInt(5)));
  return b;
}

template <typename T>
double MaxAbsDiff(const ParamSet<T>& a, const ParamSet<T>& b) {
  double worst = 0.0;
  for (std::size_t e = 0; e < a.entries().size(); ++e) {
    const auto& x = a.entries()[e].second;
    const auto& y = b.entries()[e].second;
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(double(x[i]) - double(y[i])));
    }
  }
  return worst;
}

TEST(FedSgdTest, SingleAndPairedExamples) {
  RngStream s(71, 0);
  const auto model = Imprinted<double>(8, 6, ImprintVariant::kRelu, s);
  const auto data = Data<double>(s, 2, 8);
  const auto one = FedSgd(model, {data.Slice(0, 1), 1e-3, 1});
  EXPECT_EQ(one.tensors, ForwardBackward(model, data.Slice(0, 1)).second.tensors);
  EXPECT_EQ(one.kind, PayloadKind::kGradient);
  const auto two = FedSgd(model, {data, 1e-3, 1});
  auto mean = one.tensors;
  mean.AddScaled(FedSgd(model, {data.Slice(1, 2), 1e-3, 1}).tensors, 1.0);
  mean.Scale(0.5);
  EXPECT_LE(MaxAbsDiff(mean, two.tensors), 1e-6);
  EXPECT_THROW(FedSgd(model, {data, 1e-3, 2}), std::invalid_argument);
}

TEST(FedSgdTest, TenUsersEquivalentToOneBigBatch) {
  RngStream s(72, 0);
  const auto model = Imprinted<float>(32, 64, ImprintVariant::kRelu, s);
  const auto data = Data<float>(s, 1000, 32);
  std::vector<UpdatePayload<float>> payloads;
  for (const auto& part : SplitBatch(data, 10)) payloads.push_back(FedSgd(model, {part, 1e-4, 1}));
  const auto round = SecureAggregate(payloads, AggregationMode::kWeightedMean);
  EXPECT_EQ(round.total_datapoints, 1000u);
  const auto big = FedSgd(model, {data, 1e-4, 1});
  EXPECT_LE(MaxAbsDiff(round.aggregated.tensors, big.tensors), 1e-5);
  // A plain sum is the mean scaled by the user count for equal splits.
  auto sum = SecureAggregate(payloads).aggregated;
  EXPECT_TRUE(sum.meta.is_sum);
  sum.tensors.Scale(0.1f);
  EXPECT_LE(MaxAbsDiff(sum.tensors, big.tensors), 1e-5);
}

TEST(FedAvgTest, OneStepIsNegativeScaledGradient) {
  RngStream s(73, 0);
  const auto model = Imprinted<double>(8, 6, ImprintVariant::kHardThreshold, s);
  const auto data = Data<double>(s, 4, 8);
  const double lr = 0.01;
  const auto delta = FedAvg(model, {data, lr, 1}, {data});
  EXPECT_EQ(delta.kind, PayloadKind::kParamDelta);
  const auto grad = ForwardBackward(model, data).second;
  for (std::size_t e = 0; e < grad.tensors.entries().size(); ++e) {
    const auto& g = grad.tensors.entries()[e].second;
    const auto& d = delta.tensors.entries()[e].second;
    const auto& theta = model.params.entries()[e].second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double ulp = std::max(1.0, std::abs(theta[i])) * 4e-16;
      EXPECT_NEAR(d[i], -lr * g[i], ulp);
    }
  }
}

TEST(FedAvgTest, SmallStepLimitApproachesFedSgd) {
  RngStream s(74, 0);
  const auto model = Imprinted<double>(16, 32, ImprintVariant::kHardThreshold, s);
  const auto data = Data<double>(s, 64, 16);
  const auto grad = FedSgd(model, {data, 1.0, 1}).tensors;
  std::vector<double> errors;
  for (double lr : {1e-6, 1e-7, 1e-8}) {
    auto proxy = FedAvg(model, {data, lr, 8}, SplitBatch(data, 8)).tensors;
    proxy.Scale(-1.0 / (lr * 8));
    errors.push_back(MaxAbsDiff(proxy, grad));
  }
  // Drift error shrinks linearly with the step size.
  EXPECT_LT(errors[1], 0.2 * errors[0]);
  EXPECT_LT(errors[2], 0.2 * errors[1]);
  EXPECT_LT(errors[2], 1e-4);
}

TEST(FedAvgTest, ImprintDriftBoundedByLoggedGradients) {
  RngStream s(75, 0);
  const std::size_t m = 16;
  const auto model = Imprinted<double>(m, 32, ImprintVariant::kHardThreshold, s);
  const auto data = Data<double>(s, 64, m);
  const double lr = 1e-4;
  const auto splits = SplitBatch(data, 8);
  FedAvgTrace<double> trace;
  const auto delta = FedAvg(model, {data, lr, 8}, splits, &trace);
  ASSERT_EQ(trace.step_gradients.size(), 8u);

  double max_x = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    max_x = std::max(max_x, std::sqrt(Dot<double>(data.x.row(t), data.x.row(t))));
  }
  // Replay the local models and take per-example dL/da at every step.
  ModelGraph<double> local = model;
  const std::size_t rows = model.params.Get(kImprintBias).size();
  std::vector<double> max_da(rows, 0.0);
  for (std::size_t step = 0; step < 8; ++step) {
    for (std::size_t t = 0; t < splits[step].size(); ++t) {
      const auto g = ForwardBackward(local, splits[step].Slice(t, t + 1)).second;
      for (std::size_t i = 0; i < rows; ++i) {
        max_da[i] = std::max(max_da[i], std::abs(g.tensors.Get(kImprintBias)[i]));
      }
    }
    local.params.AddScaled(trace.step_gradients[step].tensors, -lr);
  }
  double max_all = *std::max_element(max_da.begin(), max_da.end());
  const auto& dW = delta.tensors.Get(kImprintWeight);
  for (std::size_t i = 0; i < rows; ++i) {
    const double drift = std::sqrt(Dot<double>(dW.row(i), dW.row(i)));
    EXPECT_LE(drift, lr * 8 * max_da[i] * max_x * (1 + 1e-12)) << "row " << i;
    EXPECT_LE(drift, lr * 8 * max_all * max_x * (1 + 1e-12));
  }
}

TEST(FedAvgTest, DeterministicInDoublePrecision) {
  RngStream s(76, 0);
  const auto model = Imprinted<double>(8, 16, ImprintVariant::kHardThreshold, s);
  const auto data = Data<double>(s, 16, 8);
  const auto a = FedAvg(model, {data, 1e-3, 4}, SplitBatch(data, 4));
  const auto b = FedAvg(model, {data, 1e-3, 4}, SplitBatch(data, 4));
  EXPECT_EQ(a.tensors, b.tensors);
  EXPECT_THROW(FedAvg(model, {data, 1e-3, 1}, {}), std::invalid_argument);
}

TEST(SecureAggregateTest, SumSemantics) {
  RngStream s(77, 0);
  const auto model = Imprinted<double>(4, 4, ImprintVariant::kRelu, s);
  auto p = FedSgd(model, {Data<double>(s, 3, 4), 1e-3, 1});
  EXPECT_EQ(SecureAggregate(std::vector{p}).aggregated.tensors, p.tensors);
  auto neg = p;
  neg.tensors.Scale(-1.0);
  const auto zero = SecureAggregate(std::vector{p, neg}).aggregated;
  EXPECT_EQ(MaxAbsDiff(zero.tensors, p.tensors.ZerosLike()), 0.0);

  std::vector<UpdatePayload<double>> three;
  for (int i = 0; i < 3; ++i) three.push_back(FedSgd(model, {Data<double>(s, 2, 4), 1e-3, 1}));
  const auto round = SecureAggregate(three, AggregationMode::kSum, true);
  EXPECT_EQ(round.per_user.size(), 3u);
  EXPECT_TRUE(SecureAggregate(three).per_user.empty());
  for (std::size_t e = 0; e < p.tensors.entries().size(); ++e) {
    for (std::size_t i = 0; i < p.tensors.entries()[e].second.size(); ++i) {
      double oracle = 0.0;
      for (const auto& q : three) oracle += q.tensors.entries()[e].second[i];
      EXPECT_DOUBLE_EQ(round.aggregated.tensors.entries()[e].second[i], oracle);
    }
  }
  auto delta = FedAvg(model, {Data<double>(s, 2, 4), 1e-3, 1}, {Data<double>(s, 2, 4)});
  EXPECT_THROW(SecureAggregate(std::vector{p, delta}), std::invalid_argument);
  EXPECT_THROW(SecureAggregate(std::vector<UpdatePayload<double>>{}), std::invalid_argument);
}

TEST(SplitBatchTest, ContiguousNearEqualParts) {
  RngStream s(78, 0);
  const auto data = Data<double>(s, 10, 3);
  const auto parts = SplitBatch(data, 3);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].size(), 4u);
  EXPECT_EQ(parts[2].size(), 3u);
  EXPECT_EQ(parts[1].x.row(0)[0], data.x.row(4)[0]);
  EXPECT_THROW(SplitBatch(data, 11), std::invalid_argument);
}

}  // namespace
}  // namespace imprintlab
