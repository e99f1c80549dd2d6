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

#include "imprintlab/distributions.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace imprintlab {
namespace {

void RequireProbability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "quantile: probability " << p << " outside (0, 1)";
    throw std::domain_error(msg.str());
  }
}

// Acklam's rational approximation; relative error about 1e-9 before the
// refinement step in StandardNormalQuantile.
double AcklamQuantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - kLow) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double StandardNormalCdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double StandardNormalQuantile(double p) {
  RequireProbability(p);
  double x = AcklamQuantile(p);
  // One Halley step on the erfc-based CDF.
  const double e = StandardNormalCdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

ScalarDistribution ScalarDistribution::Normal(double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    throw std::invalid_argument("normal distribution needs finite mean and sd > 0");
  }
  return ScalarDistribution(NormalParams{mean, sd});
}

ScalarDistribution ScalarDistribution::Laplace(double location, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(location)) {
    throw std::invalid_argument("laplace distribution needs finite location and scale > 0");
  }
  return ScalarDistribution(LaplaceParams{location, scale});
}

ScalarDistribution ScalarDistribution::Empirical(std::vector<double> samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("empirical distribution needs at least 2 samples, got " +
                                std::to_string(samples.size()));
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("empirical sample is not finite");
  }
  std::sort(samples.begin(), samples.end());
  return ScalarDistribution(EmpiricalParams{std::move(samples)});
}

ScalarDistribution FitEmpirical(std::span<const double> samples) {
  return ScalarDistribution::Empirical(std::vector<double>(samples.begin(), samples.end()));
}

double ScalarDistribution::Cdf(double x) const {
  if (const auto* n = std::get_if<NormalParams>(&params_)) {
    return StandardNormalCdf((x - n->mean) / n->sd);
  }
  if (const auto* l = std::get_if<LaplaceParams>(&params_)) {
    const double z = (x - l->location) / l->scale;
    return z < 0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
  }
  const auto& s = std::get<EmpiricalParams>(params_).sorted;
  if (x < s.front()) return 0.0;
  if (x >= s.back()) return 1.0;
  // Last order statistic <= x keeps the function right-continuous at ties.
  const auto it = std::upper_bound(s.begin(), s.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - s.begin()) - 1;
  const double denom = static_cast<double>(s.size() - 1);
  const double gap = s[i + 1] - s[i];
  const double frac = gap > 0 ? (x - s[i]) / gap : 0.0;
  return (static_cast<double>(i) + frac) / denom;
}

double ScalarDistribution::Quantile(double p) const {
  RequireProbability(p);
  if (const auto* n = std::get_if<NormalParams>(&params_)) {
    return n->mean + n->sd * StandardNormalQuantile(p);
  }
  if (const auto* l = std::get_if<LaplaceParams>(&params_)) {
    return p < 0.5 ? l->location + l->scale * std::log(2.0 * p)
                   : l->location - l->scale * std::log(2.0 - 2.0 * p);
  }
  const auto& s = std::get<EmpiricalParams>(params_).sorted;
  const double h = static_cast<double>(s.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

std::string ScalarDistribution::Describe() const {
  std::ostringstream out;
  if (const auto* n = std::get_if<NormalParams>(&params_)) {
    out << "Normal(" << n->mean << ", " << n->sd << ")";
  } else if (const auto* l = std::get_if<LaplaceParams>(&params_)) {
    out << "Laplace(" << l->location << ", " << l->scale << ")";
  } else {
    out << "Empirical(" << std::get<EmpiricalParams>(params_).sorted.size() << " samples)";
  }
  return out.str();
}

double KolmogorovDistance(const ScalarDistribution& a, const ScalarDistribution& b) {
  // Evaluating both CDFs at every knot of either is exact for piecewise
  // linear CDFs.
  std::vector<double> knots;
  for (const auto* d : {&a, &b}) {
    if (!d->is_empirical()) {
      throw std::invalid_argument("KolmogorovDistance expects empirical distributions");
    }
    const auto& s = std::get<EmpiricalParams>(d->params()).sorted;
    knots.insert(knots.end(), s.begin(), s.end());
  }
  double worst = 0.0;
  for (double x : knots) worst = std::max(worst, std::abs(a.Cdf(x) - b.Cdf(x)));
  return worst;
}

}  // namespace imprintlab
