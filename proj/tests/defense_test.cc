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
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/defense.h"
#include "imprintlab/model.h"
#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

UpdatePayload<double> Payload(std::vector<double> w, std::vector<double> b) {
  UpdatePayload<double> p;
  p.tensors.Add(kImprintWeight, TensorD::Vector(std::move(w)));
  p.tensors.Add(kImprintBias, TensorD::Vector(std::move(b)));
  return p;
}

TEST(DefenseTest, IdentityLeavesPayloadUntouched) {
  RngStream s(91, 0);
  const auto p = Payload({1, 2, 3}, {4});
  const DefenseConfig none;
  EXPECT_TRUE(none.IsIdentity());
  EXPECT_EQ(ApplyDefense(p, none, s).tensors, p.tensors);
  const DefenseConfig zero{.noise = NoiseKind::kLaplace, .sigma = 0.0};
  EXPECT_TRUE(zero.IsIdentity());
  EXPECT_EQ(ApplyDefense(p, zero, s).tensors, p.tensors);
}

TEST(DefenseTest, ClipScalesOntoBall) {
  RngStream s(92, 0);
  const auto p = Payload({6, 0, 0}, {8});
  const DefenseConfig clip{.clip_bound = 1.0};
  const auto once = ApplyDefense(p, clip, s);
  EXPECT_NEAR(std::sqrt(once.tensors.SquaredNorm()), 1.0, 1e-15);
  EXPECT_NEAR(once.tensors.Get(kImprintWeight)[0], 0.6, 1e-15);
  EXPECT_NEAR(once.tensors.Get(kImprintBias)[0], 0.8, 1e-15);
  EXPECT_EQ(ApplyDefense(once, clip, s).tensors, once.tensors);
  const auto small = Payload({0.1}, {0.1});
  EXPECT_EQ(ApplyDefense(small, clip, s).tensors, small.tensors);
}

TEST(DefenseTest, NoiseIsUnbiasedWithExpectedSpread) {
  for (auto kind : {NoiseKind::kLaplace, NoiseKind::kGaussian}) {
    RngStream s(93, 0);
    const std::size_t n = 200000;
    const auto p = Payload(std::vector<double>(n, 1.0), {0.0});
    const DefenseConfig cfg{.noise = kind, .sigma = 0.5};
    const auto out = ApplyDefense(p, cfg, s);
    double sum = 0, ss = 0;
    for (double v : out.tensors.Get(kImprintWeight).data()) {
      sum += v - 1.0;
      ss += (v - 1.0) * (v - 1.0);
    }
    const double var = kind == NoiseKind::kLaplace ? 2 * 0.25 : 0.25;
    EXPECT_NEAR(sum / n, 0.0, 5 * std::sqrt(var / n));
    EXPECT_NEAR(ss / n, var, 0.02 * var);
  }
}

TEST(DefenseTest, ParseAndValidate) {
  EXPECT_EQ(ParseNoiseKind("laplace"), NoiseKind::kLaplace);
  EXPECT_STREQ(NoiseKindName(NoiseKind::kGaussian), "gaussian");
  EXPECT_THROW(ParseNoiseKind("poisson"), std::invalid_argument);
  EXPECT_THROW((DefenseConfig{.clip_bound = 0.0}.Validate()), std::invalid_argument);
  EXPECT_THROW((DefenseConfig{.noise = NoiseKind::kLaplace, .sigma = -1}.Validate()),
               std::invalid_argument);
}

TEST(DpRecoveryTest, ErrorScalesWithPayloadSize) {
  EXPECT_LE(DpRecoveryAnalysis(256, 16, 0.0, 4, 1).measured, 1e-14);
  const auto a = DpRecoveryAnalysis(256, 16, 1e-3, 20, 2);
  EXPECT_NEAR(a.predicted, std::sqrt(256.0 * 16) * 1e-3, 1e-15);
  EXPECT_NEAR(a.measured / a.predicted, 1.0, 0.2);
  const auto b = DpRecoveryAnalysis(256, 32, 1e-3, 20, 2);
  EXPECT_NEAR(b.measured / b.predicted, 1.0, 0.2);
  EXPECT_NEAR(b.measured / a.measured, std::sqrt(2.0), 0.15 * std::sqrt(2.0));
  EXPECT_THROW(DpRecoveryAnalysis(0, 16, 1e-3, 1, 1), std::invalid_argument);
}

}  // namespace
}  // namespace imprintlab
