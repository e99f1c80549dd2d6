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
#include <functional>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "imprintlab/distributions.h"
#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

double AdaptiveSimpson(const std::function<double(double)>& f, double a, double b, double fa,
                       double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return AdaptiveSimpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         AdaptiveSimpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

double Integrate(const std::function<double(double)>& f, double a, double b) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return AdaptiveSimpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 1e-13, 50);
}

double BisectQuantile(const ScalarDistribution& d, double p) {
  double lo = -50.0, hi = 50.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (d.Cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(DistributionTest, SymmetricCdfAtCentre) {
  EXPECT_DOUBLE_EQ(ScalarDistribution::Normal(0, 1).Cdf(0.0), 0.5);
  EXPECT_DOUBLE_EQ(ScalarDistribution::Laplace(0, 1 / std::numbers::sqrt2).Cdf(0.0), 0.5);
}

TEST(DistributionTest, NormalCdfMatchesQuadrature) {
  const auto density = [](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  };
  const double oracle = 0.5 + Integrate(density, 0.0, 1.0);
  EXPECT_NEAR(ScalarDistribution::Normal(0, 1).Cdf(1.0), oracle, 1e-7);
  EXPECT_NEAR(oracle, 0.8413, 1e-4);
}

TEST(DistributionTest, NormalQuantileMatchesBisection) {
  const auto d = ScalarDistribution::Normal(0, 1);
  EXPECT_DOUBLE_EQ(d.Quantile(0.5), 0.0);
  EXPECT_NEAR(d.Quantile(0.25), BisectQuantile(d, 0.25), 1e-9);
  EXPECT_NEAR(d.Quantile(0.25), -0.674490, 1e-6);
}

TEST(DistributionTest, LaplaceQuantileClosedForm) {
  const double b = 1 / std::numbers::sqrt2;
  const auto d = ScalarDistribution::Laplace(0, b);
  EXPECT_NEAR(d.Quantile(0.9), -b * std::log(0.2), 1e-14);
  EXPECT_NEAR(d.Quantile(0.1), b * std::log(0.2), 1e-14);
}

TEST(DistributionTest, QuantileRejectsEndpoints) {
  const auto d = ScalarDistribution::Normal(0, 1);
  EXPECT_THROW(d.Quantile(0.0), std::domain_error);
  EXPECT_THROW(d.Quantile(1.0), std::domain_error);
  EXPECT_THROW(ScalarDistribution::Normal(0, 0), std::invalid_argument);
  EXPECT_THROW(ScalarDistribution::Laplace(0, -1), std::invalid_argument);
}

TEST(DistributionTest, RoundTripAndMonotoneForContinuousKinds) {
  for (const auto& d : {ScalarDistribution::Normal(0.3, 2.0),
                        ScalarDistribution::Laplace(-1.0, 0.5)}) {
    for (double p = 1e-6; p < 1.0 - 1e-6; p += 0.0137) {
      EXPECT_NEAR(d.Cdf(d.Quantile(p)), p, 1e-9) << d.Describe() << " p=" << p;
    }
    const double lo = d.Quantile(1e-6), hi = d.Quantile(1 - 1e-6);
    double prev_q = -INFINITY, prev_c = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = lo + (hi - lo) * i / 1000.0;
      EXPECT_NEAR(d.Quantile(d.Cdf(x)), x, 1e-7 * std::max(1.0, std::abs(x)));
      const double c = d.Cdf(x);
      EXPECT_GT(c, prev_c);
      prev_c = c;
      const double q = d.Quantile(std::min(1 - 1e-9, std::max(1e-9, i / 1000.0)));
      EXPECT_GE(q, prev_q);
      prev_q = q;
    }
  }
}

TEST(EmpiricalTest, TwoPointInterpolation) {
  const std::vector<double> s = {1.0, 0.0};
  const auto d = FitEmpirical(s);
  EXPECT_DOUBLE_EQ(d.Quantile(0.5), 0.5);
  EXPECT_DOUBLE_EQ(d.Cdf(0.5), 0.5);
  EXPECT_DOUBLE_EQ(d.Cdf(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(d.Cdf(2.0), 1.0);
}

TEST(EmpiricalTest, RejectsTooFewOrNonFinite) {
  EXPECT_THROW(FitEmpirical(std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(FitEmpirical(std::vector<double>{1.0, NAN}), std::invalid_argument);
}

TEST(EmpiricalTest, ConvergesToNormal) {
  RngStream s(31, 0);
  std::vector<double> x(10000);
  for (auto& v : x) v = s.Normal();
  EXPECT_NEAR(FitEmpirical(x).Quantile(0.25), -0.6745, 0.05);
}

TEST(EmpiricalTest, SmallFractionCloseToFullPool) {
  RngStream s(32, 0);
  std::vector<double> pool(1000000);
  for (auto& v : pool) v = s.Normal();
  const std::vector<double> small(pool.begin(), pool.begin() + 1000);
  EXPECT_LT(KolmogorovDistance(FitEmpirical(small), FitEmpirical(pool)), 0.05);
}

TEST(EmpiricalTest, CdfInvertsQuantile) {
  RngStream s(33, 0);
  std::vector<double> x(50);
  for (auto& v : x) v = s.Normal();
  const auto d = FitEmpirical(x);
  for (double p = 0.01; p < 1.0; p += 0.01) EXPECT_NEAR(d.Cdf(d.Quantile(p)), p, 1e-12);
}

}  // namespace
}  // namespace imprintlab
