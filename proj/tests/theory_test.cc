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
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/theory.h"

namespace imprintlab {
namespace {

// Singleton count averaged over an explicit list of weak compositions.
Rational AverageSingletons(const std::vector<std::vector<int>>& comps) {
  BigInt singles = 0;
  for (const auto& c : comps) {
    for (int v : c) singles += (v == 1);
  }
  return Rational(singles, BigInt(comps.size()));
}

TEST(BinomialTest, SmallValues) {
  EXPECT_EQ(Binomial(5, 2), 10);
  EXPECT_EQ(Binomial(10, 0), 1);
  EXPECT_EQ(Binomial(3, 4), 0);
  EXPECT_EQ(Binomial(3, -1), 0);
  EXPECT_EQ(Binomial(60, 30), BigInt("118264581564861424"));
}

TEST(CompositionOracleTest, HandEnumeration) {
  EXPECT_EQ(CompositionOracle(2, 2), Rational(2, 3));
  const std::vector<std::vector<int>> three = {{3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {2, 1, 0},
                                               {2, 0, 1}, {1, 2, 0}, {0, 2, 1}, {1, 0, 2},
                                               {0, 1, 2}, {1, 1, 1}};
  EXPECT_EQ(CompositionOracle(3, 3), AverageSingletons(three));
  EXPECT_EQ(CompositionOracle(3, 3), Rational(9, 10));
  EXPECT_THROW(CompositionOracle(30, 30, 1000), TheoryDomainError);
}

TEST(ClosedFormTest, MatchesOracleExactly) {
  for (std::size_t k = 5; k <= 10; ++k) {
    for (std::size_t n = 4; n < k; ++n) {
      EXPECT_EQ(ExpectedRecoveryExact(n, k) + Rational(n, k), CompositionOracle(n, k))
          << "n=" << n << " k=" << k;
    }
  }
  EXPECT_EQ(ExpectedRecoveryExact(4, 6) + Rational(4, 6), CompositionOracle(4, 6));
}

TEST(ClosedFormTest, BatchOf64) {
  EXPECT_GE(ExpectedRecovery(64, 156), 32.0);
  EXPECT_NEAR(ExpectedRecovery(64, 156), 32.004, 1e-3);
  EXPECT_NEAR(ExpectedRecovery(64, 128), 28.17, 1e-2);
  EXPECT_NEAR(ExpectedRecovery(64, 256), 40.94, 1e-2);
  EXPECT_LT(ExpectedRecovery(64, 128), ExpectedRecovery(64, 156));
  EXPECT_LT(ExpectedRecovery(64, 156), ExpectedRecovery(64, 256));
}

TEST(ClosedFormTest, MonotoneInBins) {
  for (std::size_t k = 9; k < 60; ++k) {
    EXPECT_GE(ExpectedRecoveryExact(8, k + 1), ExpectedRecoveryExact(8, k)) << "k=" << k;
  }
}

TEST(ClosedFormTest, DomainErrors) {
  EXPECT_THROW(ExpectedRecovery(2, 5), TheoryDomainError);
  EXPECT_THROW(ExpectedRecovery(8, 8), TheoryDomainError);
  EXPECT_THROW(ExpectedRecovery(9, 8), TheoryDomainError);
}

TEST(IidTest, ClosedForm) {
  EXPECT_DOUBLE_EQ(IidSingletonExpectation(1, 7), 1.0);
  EXPECT_NEAR(IidSingletonExpectation(64, 156), 64 * std::pow(155.0 / 156.0, 63), 1e-12);
  EXPECT_NEAR(IidSingletonExpectation(64, 156), 42.68, 0.005);
}

TEST(IidTest, MonteCarlo) {
  const auto wide = IidMonteCarlo(8, 10000, 2000, 1);
  EXPECT_NEAR(wide.mean, 8.0, std::max(3 * wide.std_error, 0.02));
  const auto est = IidMonteCarlo(64, 156, 4000, 2);
  EXPECT_EQ(est.replicates, 4000u);
  EXPECT_GT(est.std_error, 0.0);
  EXPECT_NEAR(est.mean, est.iid_closed_form, 3 * est.std_error);
  EXPECT_THROW(IidMonteCarlo(4, 4, 0, 1), std::invalid_argument);
}

TEST(IidTest, IndependentOfWorkerCount) {
  const auto a = IidMonteCarlo(32, 64, 301, 9, 1);
  const auto b = IidMonteCarlo(32, 64, 301, 9, 4);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_NE(a.mean, IidMonteCarlo(32, 64, 301, 10, 1).mean);
}

TEST(OneShotTest, SuccessProbability) {
  EXPECT_DOUBLE_EQ(OneShotSuccess(1, 0.5), 0.5);
  EXPECT_NEAR(OneShotSuccess(2, 0.5), 0.5, 1e-15);
  const double n = 4096;
  EXPECT_NEAR(OneShotSuccess(4096, 1 / n), std::pow(1 - 1 / n, n - 1), 1e-12);
  EXPECT_NEAR(OneShotMax(4096), 0.368, 1e-3);
  EXPECT_DOUBLE_EQ(OneShotArgmax(4096), 1 / n);
  EXPECT_DOUBLE_EQ(OneShotMax(1), 1.0);
  double best = 0, best_p = 0;
  for (int i = 1; i < 2000; ++i) {
    const double p = i * 1e-6;
    if (OneShotSuccess(4096, p) > best) {
      best = OneShotSuccess(4096, p);
      best_p = p;
    }
  }
  EXPECT_NEAR(best_p, 1 / n, 1e-6);
  EXPECT_THROW(OneShotSuccess(4, 0.0), TheoryDomainError);
  EXPECT_THROW(OneShotSuccess(4, 1.0), TheoryDomainError);
  EXPECT_THROW(OneShotSuccess(0, 0.5), TheoryDomainError);
}

TEST(OverheadTest, ParameterCounts) {
  for (std::size_t m : {1u, 64u, 3072u}) EXPECT_EQ(Overhead(m, 2, 0).total, 2 * (m + 1));
  const auto r18 = Overhead(150528, 2, 0, 0, 11'700'000);
  EXPECT_NEAR(r18.relative, 0.026, 5e-4);
  const auto r50 = Overhead(150528, 2, 0, 0, 25'600'000);
  EXPECT_NEAR(r50.relative, 0.012, 5e-4);
  const auto big = Overhead(150528, 128, 0);
  EXPECT_EQ(big.weights, 19'267'584u);
  EXPECT_EQ(big.weights + big.biases, 19'267'712u);
  EXPECT_EQ(big.biases, 128u);
  EXPECT_EQ(big.relative, 0.0);
  const auto decoys = Overhead(10, 4, 2, 7);
  EXPECT_EQ(decoys.total, 6u * 11 + 7);
}

TEST(CurveTest, CsvOutput) {
  const auto pts = RecoveryCurve(4, {2, 6});
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_TRUE(std::isnan(pts[0].composition_model));
  EXPECT_NEAR(pts[1].composition_model, ExpectedRecovery(4, 6), 1e-15);
  const std::string csv = RecoveryCurveCsv(pts);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,k,composition_model,iid_model");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("4,2,,", 0), 0u);
  const std::string shot = OneShotCurveCsv(16, 1e-3, 0.5, 5);
  EXPECT_EQ(std::count(shot.begin(), shot.end(), '\n'), 6);
  EXPECT_THROW(OneShotCurveCsv(16, 0.5, 0.1, 5), TheoryDomainError);
}

}  // namespace
}  // namespace imprintlab
