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

#include "imprintlab/theory.h"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

constexpr std::uint64_t kMonteCarloStream = 0x7e0a0001;

double ToDouble(const Rational& r) { return r.convert_to<double>(); }

}  // namespace

BigInt Binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt acc = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    acc *= n - k + i;
    acc /= i;
  }
  return acc;
}

Rational ExpectedRecoveryExact(std::size_t n_in, std::size_t k_in) {
  if (!(k_in > n_in && n_in > 2)) {
    throw TheoryDomainError("expected recovery needs k > n > 2, got n=" + std::to_string(n_in) +
                            " k=" + std::to_string(k_in));
  }
  const auto n = static_cast<std::int64_t>(n_in);
  const auto k = static_cast<std::int64_t>(k_in);
  BigInt numerator = 0;
  for (std::int64_t i = 1; i <= n - 2; ++i) {
    BigInt inner = 0;
    for (std::int64_t j = 1; j <= (n - i) / 2; ++j) {
      inner += Binomial(k - i, j) * Binomial(n - i - j - 1, j - 1);
    }
    numerator += i * Binomial(k, i) * inner;
  }
  numerator += n * Binomial(k, n);
  const BigInt total = Binomial(k + n - 1, k - 1);
  return Rational(numerator, total) - Rational(n, k);
}

double ExpectedRecovery(std::size_t n, std::size_t k) {
  return ToDouble(ExpectedRecoveryExact(n, k));
}

Rational CompositionOracle(std::size_t n, std::size_t k, std::uint64_t guard) {
  if (k == 0) throw TheoryDomainError("composition oracle needs k >= 1");
  const BigInt count = Binomial(static_cast<std::int64_t>(n + k - 1),
                                static_cast<std::int64_t>(k - 1));
  if (count > guard) {
    throw TheoryDomainError("composition oracle: " + count.str() + " compositions exceed guard " +
                            std::to_string(guard));
  }
  std::uint64_t compositions = 0;
  std::uint64_t singletons = 0;
  std::vector<std::size_t> parts(k, 0);
  std::function<void(std::size_t, std::size_t, std::size_t)> walk =
      [&](std::size_t slot, std::size_t remaining, std::size_t ones) {
        if (slot + 1 == k) {
          ++compositions;
          singletons += ones + (remaining == 1 ? 1 : 0);
          return;
        }
        for (std::size_t v = 0; v <= remaining; ++v) {
          walk(slot + 1, remaining - v, ones + (v == 1 ? 1 : 0));
        }
      };
  walk(0, n, 0);
  return Rational(BigInt(singletons), BigInt(compositions));
}

double IidSingletonExpectation(std::size_t n, std::size_t k) {
  if (n == 0) return 0.0;
  return static_cast<double>(n) *
         std::pow(1.0 - 1.0 / static_cast<double>(k), static_cast<double>(n - 1));
}

MonteCarloEstimate IidMonteCarlo(std::size_t n, std::size_t k, std::size_t replicates,
                                 std::uint64_t seed, std::size_t jobs) {
  if (replicates == 0) throw std::invalid_argument("monte carlo needs at least one replicate");
  if (k == 0) throw std::invalid_argument("monte carlo needs k >= 1");
  std::vector<double> counts(replicates, 0.0);
  const RngStream root(seed, kMonteCarloStream);
  auto work = [&](std::size_t begin, std::size_t stride) {
    std::vector<std::size_t> occupancy(k);
    for (std::size_t r = begin; r < replicates; r += stride) {
      RngStream s = root.Substream(r);
      std::fill(occupancy.begin(), occupancy.end(), 0);
      for (std::size_t i = 0; i < n; ++i) ++occupancy[s.UniformInt(k)];
      std::size_t singles = 0;
      for (std::size_t c : occupancy) singles += (c == 1);
      counts[r] = static_cast<double>(singles);
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, replicates));
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
    for (auto& t : pool) t.join();
  }
  double sum = 0.0;
  for (double c : counts) sum += c;
  const double mean = sum / static_cast<double>(replicates);
  double ss = 0.0;
  for (double c : counts) ss += (c - mean) * (c - mean);
  MonteCarloEstimate est;
  est.mean = mean;
  est.replicates = replicates;
  est.std_error = replicates > 1
                    ? std::sqrt(ss / static_cast<double>(replicates - 1) /
                                static_cast<double>(replicates))
                    : 0.0;
  est.iid_closed_form = IidSingletonExpectation(n, k);
  return est;
}

double OneShotSuccess(std::size_t n, double p) {
  if (!(p > 0.0 && p < 1.0)) throw TheoryDomainError("one-shot mass must lie in (0, 1)");
  if (n == 0) throw TheoryDomainError("one-shot batch must be non-empty");
  const double nd = static_cast<double>(n);
  return nd * p * std::exp((nd - 1.0) * std::log1p(-p));
}

double OneShotArgmax(std::size_t n) {
  if (n == 0) throw TheoryDomainError("one-shot batch must be non-empty");
  return 1.0 / static_cast<double>(n);
}

double OneShotMax(std::size_t n) {
  if (n == 1) return 1.0;
  return OneShotSuccess(n, OneShotArgmax(n));
}

OverheadReport Overhead(std::size_t m, std::size_t k, std::size_t decoys,
                        std::uint64_t bridge_params, std::uint64_t base_params) {
  OverheadReport r;
  const std::uint64_t rows = k + decoys;
  r.weights = rows * m;
  r.biases = rows;
  r.bridge = bridge_params;
  r.total = r.weights + r.biases + r.bridge;
  r.relative = base_params > 0 ? static_cast<double>(r.total) / static_cast<double>(base_params)
                               : 0.0;
  return r;
}

std::vector<CurvePoint> RecoveryCurve(std::size_t n, const std::vector<std::size_t>& bins) {
  std::vector<CurvePoint> out;
  for (std::size_t k : bins) {
    CurvePoint p;
    p.n = n;
    p.k = k;
    p.composition_model = (k > n && n > 2) ? ExpectedRecovery(n, k)
                                           : std::numeric_limits<double>::quiet_NaN();
    p.iid_model = IidSingletonExpectation(n, k);
    out.push_back(p);
  }
  return out;
}

std::string RecoveryCurveCsv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os.precision(17);
  os << "n,k,composition_model,iid_model\n";
  for (const auto& p : points) {
    os << p.n << ',' << p.k << ',';
    if (!std::isnan(p.composition_model)) os << p.composition_model;
    os << ',' << p.iid_model << '\n';
  }
  return os.str();
}

std::string OneShotCurveCsv(std::size_t n, double p_lo, double p_hi, std::size_t points) {
  if (points < 2 || !(p_lo > 0.0) || !(p_hi < 1.0) || !(p_lo < p_hi)) {
    throw TheoryDomainError("one-shot curve needs 0 < p_lo < p_hi < 1 and >= 2 points");
  }
  std::ostringstream os;
  os.precision(17);
  os << "p,success\n";
  const double a = std::log(p_lo);
  const double b = std::log(p_hi);
  for (std::size_t i = 0; i < points; ++i) {
    const double p = std::exp(a + (b - a) * static_cast<double>(i) /
                                      static_cast<double>(points - 1));
    os << p << ',' << OneShotSuccess(n, p) << '\n';
  }
  return os.str();
}

}  // namespace imprintlab
