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

#include "imprintlab/metrics.h"

#include <cmath>
#include <limits>
#include <string>

#include "imprintlab/linalg.h"

namespace imprintlab {
namespace {

template <typename T>
double SquaredDistance(std::span<const T> a, std::span<const T> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <typename T>
void CheckWidth(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth) {
  if (truth.rank() != 2) throw ShapeError("truth must be a matrix");
  for (const auto& c : cands) {
    if (c.size() != truth.cols()) {
      throw ShapeError("candidate of length " + std::to_string(c.size()) +
                       " vs truth width " + std::to_string(truth.cols()));
    }
  }
}

}  // namespace

template <typename T>
double Psnr(std::span<const T> a, std::span<const T> b, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr peak must be positive");
  if (a.size() != b.size() || a.empty()) throw ShapeError("psnr inputs differ in length");
  const double mse = SquaredDistance(a, b) / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCeiling;
  return std::min(kPsnrCeiling, 10.0 * std::log10(peak * peak / mse));
}

template <typename T>
double RelativeError(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("relative error inputs differ in length");
  const double num = std::sqrt(SquaredDistance(a, b));
  double den = 0.0;
  for (T v : b) den += static_cast<double>(v) * static_cast<double>(v);
  den = std::sqrt(den);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

template <typename T>
std::vector<std::size_t> Match(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth) {
  CheckWidth(cands, truth);
  if (cands.empty()) return {};
  TensorD cost({cands.size(), truth.rows()});
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (std::size_t j = 0; j < truth.rows(); ++j) {
      cost.at(i, j) = SquaredDistance<T>(cands[i].data(), truth.row(j));
    }
  }
  return SolveAssignment(cost);
}

std::vector<MatchedPair> Pairs(const std::vector<std::size_t>& matching) {
  std::vector<MatchedPair> out;
  for (std::size_t i = 0; i < matching.size(); ++i) {
    if (matching[i] != kUnassigned) out.push_back({i, matching[i]});
  }
  return out;
}

template <typename T>
std::size_t ExactCount(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                       const std::vector<MatchedPair>& pairs, double rel_tol) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("exact-count tolerance must be positive");
  std::size_t count = 0;
  for (const auto& p : pairs) {
    count += RelativeError<T>(cands[p.candidate].data(), truth.row(p.truth)) <= rel_tol;
  }
  return count;
}

namespace {

template <typename T>
bool Identified(std::span<const T> cand, const Tensor<T>& truth, std::size_t target,
                const Tensor<T>& pool) {
  const double own = SquaredDistance<T>(cand, truth.row(target));
  for (std::size_t j = 0; j < truth.rows(); ++j) {
    if (j != target && SquaredDistance<T>(cand, truth.row(j)) <= own) return false;
  }
  for (std::size_t j = 0; j < pool.rows(); ++j) {
    if (SquaredDistance<T>(cand, pool.row(j)) <= own) return false;
  }
  return true;
}

}  // namespace

template <typename T>
double IipPixel(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                const std::vector<MatchedPair>& pairs, const Tensor<T>& pool) {
  if (pool.size() > 0 && (pool.rank() != 2 || pool.cols() != truth.cols())) {
    throw ShapeError("distractor pool width differs from truth");
  }
  if (truth.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += Identified<T>(cands[p.candidate].data(), truth, p.truth, pool);
  return static_cast<double>(hits) / static_cast<double>(truth.rows());
}

template <typename T>
ScoreReport Score(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                  const Tensor<T>& pool, const ScoreOptions& options) {
  ScoreReport report;
  report.candidates = cands.size();
  report.truth_rows = truth.rows();
  report.matching = Match(cands, truth);
  const auto pairs = Pairs(report.matching);
  double psnr_sum = 0.0;
  double exact_psnr_sum = 0.0;
  std::size_t identified = 0;
  for (const auto& p : pairs) {
    SampleScore s;
    s.candidate = p.candidate;
    s.truth = p.truth;
    const auto c = cands[p.candidate].data();
    const auto t = truth.row(p.truth);
    s.psnr = Psnr<T>(c, t, options.peak);
    s.rel_error = RelativeError<T>(c, t);
    s.exact = s.rel_error <= options.rel_tol;
    s.identified = Identified<T>(c, truth, p.truth, pool);
    psnr_sum += s.psnr;
    if (s.exact) {
      ++report.exact_count;
      exact_psnr_sum += s.psnr;
    }
    identified += s.identified;
    report.samples.push_back(s);
  }
  if (!pairs.empty()) report.mean_psnr = psnr_sum / static_cast<double>(pairs.size());
  if (report.exact_count > 0) {
    report.mean_psnr_exact = exact_psnr_sum / static_cast<double>(report.exact_count);
  }
  if (truth.rows() > 0) {
    report.iip = static_cast<double>(identified) / static_cast<double>(truth.rows());
  }
  return report;
}

#define IMPRINTLAB_INSTANTIATE(T)                                                             \
  template double Psnr<T>(std::span<const T>, std::span<const T>, double);                     \
  template double RelativeError<T>(std::span<const T>, std::span<const T>);                    \
  template std::vector<std::size_t> Match(const std::vector<Tensor<T>>&, const Tensor<T>&);    \
  template std::size_t ExactCount(const std::vector<Tensor<T>>&, const Tensor<T>&,             \
                                  const std::vector<MatchedPair>&, double);                   \
  template double IipPixel(const std::vector<Tensor<T>>&, const Tensor<T>&,                   \
                           const std::vector<MatchedPair>&, const Tensor<T>&);                \
  template ScoreReport Score(const std::vector<Tensor<T>>&, const Tensor<T>&, const Tensor<T>&, \
                             const ScoreOptions&);
IMPRINTLAB_INSTANTIATE(float)
IMPRINTLAB_INSTANTIATE(double)
#undef IMPRINTLAB_INSTANTIATE

}  // namespace imprintlab
