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

#ifndef IMPRINTLAB_DISTRIBUTIONS_H_
#define IMPRINTLAB_DISTRIBUTIONS_H_

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace imprintlab {

struct NormalParams {
  double mean = 0.0;
  double sd = 1.0;
};

struct LaplaceParams {
  double location = 0.0;
  double scale = 1.0;
};

struct EmpiricalParams {
  std::vector<double> sorted;  // ascending, at least two samples
};

// Distribution of the scalar measurement the attacker bins against.
class ScalarDistribution {
 public:
  static ScalarDistribution Normal(double mean, double sd);
  static ScalarDistribution Laplace(double location, double scale);
  // Takes ownership of the samples and sorts them.
  static ScalarDistribution Empirical(std::vector<double> samples);

  // P(X <= x). The empirical kind interpolates linearly between order
  // statistics, which makes it the exact inverse of the type-7 quantile.
  double Cdf(double x) const;
  // Inverse CDF for p in (0, 1); throws std::domain_error otherwise.
  double Quantile(double p) const;

  bool is_normal() const { return std::holds_alternative<NormalParams>(params_); }
  bool is_laplace() const { return std::holds_alternative<LaplaceParams>(params_); }
  bool is_empirical() const { return std::holds_alternative<EmpiricalParams>(params_); }
  const std::variant<NormalParams, LaplaceParams, EmpiricalParams>& params() const {
    return params_;
  }
  std::string Describe() const;

 private:
  explicit ScalarDistribution(std::variant<NormalParams, LaplaceParams, EmpiricalParams> p)
      : params_(std::move(p)) {}

  std::variant<NormalParams, LaplaceParams, EmpiricalParams> params_;
};

// Empirical distribution over finite samples (at least two).
ScalarDistribution FitEmpirical(std::span<const double> samples);

// Standard normal helpers.
double StandardNormalCdf(double z);
double StandardNormalQuantile(double p);

// Two-sample Kolmogorov distance between two empirical distributions.
double KolmogorovDistance(const ScalarDistribution& a, const ScalarDistribution& b);

}  // namespace imprintlab

#endif  // IMPRINTLAB_DISTRIBUTIONS_H_
