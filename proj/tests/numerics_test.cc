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
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/linalg.h"
#include "imprintlab/rng.h"
#include "imprintlab/tensor.h"

namespace imprintlab {
namespace {

TEST(PhiloxTest, KnownAnswerVectors) {
  using W = std::array<std::uint32_t, 4>;
  EXPECT_EQ(Philox4x32({0, 0, 0, 0}, {0, 0}),
            (W{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                       {0xffffffffu, 0xffffffffu}),
            (W{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                       {0xa4093822u, 0x299f31d0u}),
            (W{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStreamTest, GoldenSequences) {
  const std::vector<std::uint32_t> golden00 = {
      0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u, 0xf8e4cca4u,
      0x5cb200dbu, 0xb1a574ebu, 0x097eff67u, 0x04faa329u, 0x51c732a6u};
  const std::vector<std::uint32_t> golden42_7 = {
      0x67ee6f2cu, 0xe55410ccu, 0x6c7eca35u, 0x557398d3u, 0xe5dde940u,
      0x600f6196u, 0x8fcdf8f1u, 0x2c8ed839u, 0x24ecfc6eu, 0xf000aacdu};
  RngStream a(0, 0);
  RngStream b(42, 7);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.NextU32(), golden00[i]) << i;
    EXPECT_EQ(b.NextU32(), golden42_7[i]) << i;
  }
  RngStream c(42, 7);
  EXPECT_DOUBLE_EQ(c.Normal(), -1.1917784202360697);
  EXPECT_DOUBLE_EQ(c.Normal(), 0.61851213696933816);
}

TEST(RngStreamTest, SameSeedSameTensor) {
  RngStream a(9, 3);
  RngStream b(9, 3);
  EXPECT_EQ(RandGaussian<double>(a, {4, 5}), RandGaussian<double>(b, {4, 5}));
}

TEST(RngStreamTest, GaussianMoments) {
  RngStream s(1, 1);
  const auto t = RandGaussian<double>(s, {1000000});
  const double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / t.size();
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(std::sqrt(var), 1.0, 0.01);
}

TEST(RngStreamTest, DistinctStreamsUncorrelated) {
  RngStream s0(5, 0);
  RngStream s1(5, 1);
  const std::size_t n = 100000;
  const auto a = RandGaussian<double>(s0, {n});
  const auto b = RandGaussian<double>(s1, {n});
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.01);
}

TEST(RngStreamTest, SubstreamsDifferFromParentAndEachOther) {
  RngStream parent(3, 4);
  RngStream c0 = parent.Substream(0);
  RngStream c1 = parent.Substream(1);
  RngStream c0again = parent.Substream(0);
  const auto x0 = c0.NextU64();
  EXPECT_EQ(x0, c0again.NextU64());
  EXPECT_NE(x0, c1.NextU64());
  EXPECT_NE(x0, RngStream(3, 4).NextU64());
}

TEST(RngStreamTest, UniformIntInRangeAndUniformOpen) {
  RngStream s(2, 2);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = s.UniformInt(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.UniformOpen();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_THROW(s.UniformInt(0), std::invalid_argument);
}

TEST(MatmulTest, IdentityLeavesInputUnchanged) {
  const auto eye = TensorD::Matrix(2, 2, {1, 0, 0, 1});
  const auto x = TensorD::Matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(Matmul(eye, x), x);
}

TEST(MatmulTest, HandArithmetic) {
  const auto a = TensorD::Matrix(2, 2, {1, 2, 3, 4});
  const auto b = TensorD::Matrix(2, 1, {1, 1});
  EXPECT_EQ(Matmul(a, b), TensorD::Matrix(2, 1, {3, 7}));
}

TEST(MatmulTest, MatchesNaiveTripleLoop) {
  RngStream s(11, 0);
  const auto a = RandGaussian<float>(s, {5, 7});
  const auto b = RandGaussian<float>(s, {7, 3});
  const auto c = Matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 7; ++k) {
        acc += static_cast<double>(a.at(i, k)) * static_cast<double>(b.at(k, j));
      }
      EXPECT_NEAR(c.at(i, j), acc, 1e-6 * std::max(1.0, std::abs(acc)));
    }
  }
}

TEST(MatmulTest, AssociativeInSinglePrecision) {
  RngStream s(12, 0);
  const auto a = RandGaussian<float>(s, {3, 4});
  const auto b = RandGaussian<float>(s, {4, 5});
  const auto c = RandGaussian<float>(s, {5, 2});
  const auto left = Matmul(Matmul(a, b), c);
  const auto right = Matmul(a, Matmul(b, c));
  for (std::size_t i = 0; i < left.size(); ++i) {
    EXPECT_NEAR(left[i], right[i], 1e-5 * std::max(1.0f, std::abs(left[i])));
  }
}

TEST(MatmulTest, ShapeMismatchThrows) {
  EXPECT_THROW(Matmul(TensorD({2, 3}), TensorD({2, 3})), ShapeError);
}

TEST(DctRowTest, ZeroFrequencyIsConstant) {
  const auto row = DctRow(4, 0);
  for (double v : row.data()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(DctRowTest, MatchesDirectTrig) {
  const auto row = DctRow(8, 1);
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_NEAR(row[j], 0.5 * std::cos(std::numbers::pi * (2.0 * j + 1.0) / 16.0), 1e-15);
  }
}

TEST(DctRowTest, RowsAreOrthogonal) {
  for (std::size_t a = 1; a < 12; ++a) {
    for (std::size_t b = a + 1; b < 12; ++b) {
      EXPECT_NEAR(Dot<double>(DctRow(12, a).data(), DctRow(12, b).data()), 0.0, 1e-12);
    }
  }
}

TEST(DctRowTest, FrequencyOutOfRange) {
  EXPECT_THROW(DctRow(4, 4), std::out_of_range);
}

double BruteForceMin(const TensorD& cost) {
  const std::size_t n = cost.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost.at(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void ExpectBijection(const std::vector<std::size_t>& a, std::size_t n) {
  ASSERT_EQ(a.size(), n);
  std::set<std::size_t> seen(a.begin(), a.end());
  EXPECT_EQ(seen.size(), n);
  EXPECT_LT(*seen.rbegin(), n);
}

TEST(AssignmentTest, DiagonalDominantGivesIdentity) {
  TensorD cost({5, 5});
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) cost.at(i, j) = i == j ? 0.0 : 10.0 + i + j;
  }
  const auto a = SolveAssignment(cost);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(a[i], i);
}

TEST(AssignmentTest, MatchesBruteForceUpToSix) {
  RngStream s(21, 0);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      TensorD cost({n, n});
      for (auto& v : cost.data()) v = s.Uniform();
      const auto a = SolveAssignment(cost);
      ExpectBijection(a, n);
      EXPECT_NEAR(AssignmentCost(cost, a), BruteForceMin(cost), 1e-12);
      double identity = 0.0;
      for (std::size_t i = 0; i < n; ++i) identity += cost.at(i, i);
      EXPECT_LE(AssignmentCost(cost, a), identity + 1e-12);
    }
  }
}

TEST(AssignmentTest, TiedOptimaReturnAnOptimum) {
  const auto cost = TensorD::Matrix(2, 2, {1, 1, 1, 1});
  const auto a = SolveAssignment(cost);
  ExpectBijection(a, 2);
  EXPECT_DOUBLE_EQ(AssignmentCost(cost, a), 2.0);
  const auto cost3 = TensorD::Matrix(3, 3, {0, 0, 5, 0, 0, 5, 5, 5, 0});
  EXPECT_DOUBLE_EQ(AssignmentCost(cost3, SolveAssignment(cost3)), BruteForceMin(cost3));
}

TEST(AssignmentTest, RectangularUsesEveryRowOrColumnOnce) {
  RngStream s(22, 0);
  TensorD wide({3, 6});
  for (auto& v : wide.data()) v = s.Uniform();
  const auto a = SolveAssignment(wide);
  ASSERT_EQ(a.size(), 3u);
  std::set<std::size_t> cols(a.begin(), a.end());
  EXPECT_EQ(cols.size(), 3u);
  // Oracle: best over all injective maps of 3 rows into 6 columns.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      for (std::size_t k = 0; k < 6; ++k) {
        if (i == j || j == k || i == k) continue;
        best = std::min(best, wide.at(0, i) + wide.at(1, j) + wide.at(2, k));
      }
    }
  }
  EXPECT_NEAR(AssignmentCost(wide, a), best, 1e-12);

  TensorD tall({4, 2});
  for (auto& v : tall.data()) v = s.Uniform();
  const auto b = SolveAssignment(tall);
  EXPECT_EQ(std::count(b.begin(), b.end(), kUnassigned), 2);
}

TEST(AssignmentTest, NonFiniteCostRejected) {
  auto cost = TensorD::Matrix(2, 2, {0, 1, 1, 0});
  cost.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(SolveAssignment(cost), std::invalid_argument);
}

TEST(TensorTest, ShapeAndDataMustAgree) {
  EXPECT_THROW(TensorD({2, 3}, std::vector<double>(5)), ShapeError);
  const TensorD t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(ShapeSize(t.shape()), t.size());
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

}  // namespace
}  // namespace imprintlab
