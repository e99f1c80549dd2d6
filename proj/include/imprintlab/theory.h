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

#ifndef IMPRINTLAB_THEORY_H_
#define IMPRINTLAB_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace imprintlab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

class TheoryDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

BigInt Binomial(std::int64_t n, std::int64_t k);

// Expected number of exactly recovered points for a batch of n spread over k
// bins when every weak composition of n into k parts is equally likely, with
// the -n/k residual kept. Requires k > n > 2.
Rational ExpectedRecoveryExact(std::size_t n, std::size_t k);
double ExpectedRecovery(std::size_t n, std::size_t k);

// Exhaustive average of the singleton-part count over all weak compositions
// of n into k parts. Throws when there are more than `guard` compositions.
Rational CompositionOracle(std::size_t n, std::size_t k, std::uint64_t guard = 10'000'000);

// n * (1 - 1/k)^(n-1): expected singleton bins under iid uniform occupancy.
double IidSingletonExpectation(std::size_t n, std::size_t k);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
  double iid_closed_form = 0.0;
};

// Drops n iid points into k equal-mass bins per replicate and counts the
// singleton bins. Replicate r draws from its own substream, so the result
// does not depend on `jobs`.
MonteCarloEstimate IidMonteCarlo(std::size_t n, std::size_t k, std::size_t replicates,
                                 std::uint64_t seed, std::size_t jobs = 1);

// Probability that exactly one of n iid points falls in a mass-p bin.
double OneShotSuccess(std::size_t n, double p);
double OneShotArgmax(std::size_t n);
double OneShotMax(std::size_t n);

struct OverheadReport {
  std::uint64_t weights = 0;
  std::uint64_t biases = 0;
  std::uint64_t bridge = 0;
  std::uint64_t total = 0;
  double relative = 0.0;  // total / base_params, 0 when no base is given
};

OverheadReport Overhead(std::size_t m, std::size_t k, std::size_t decoys,
                        std::uint64_t bridge_params = 0, std::uint64_t base_params = 0);

struct CurvePoint {
  std::size_t n = 0;
  std::size_t k = 0;
  double composition_model = 0.0;  // NaN outside k > n > 2
  double iid_model = 0.0;
};

std::vector<CurvePoint> RecoveryCurve(std::size_t n, const std::vector<std::size_t>& bins);
std::string RecoveryCurveCsv(const std::vector<CurvePoint>& points);
// p, success probability for p on a log grid between p_lo and p_hi.
std::string OneShotCurveCsv(std::size_t n, double p_lo, double p_hi, std::size_t points);

}  // namespace imprintlab

#endif  // IMPRINTLAB_THEORY_H_
