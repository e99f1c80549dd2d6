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

#ifndef IMPRINTLAB_METRICS_H_
#define IMPRINTLAB_METRICS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "imprintlab/tensor.h"

namespace imprintlab {

// Sentinel returned for identical inputs.
inline constexpr double kPsnrCeiling = 300.0;

template <typename T>
double Psnr(std::span<const T> a, std::span<const T> b, double peak = 1.0);

// ||a - b|| / ||b||; returns 0 when both are zero and +inf when only b is.
template <typename T>
double RelativeError(std::span<const T> a, std::span<const T> b);

// Assignment of candidates to truth rows minimising total squared distance.
// result[i] is the truth row of candidate i, or kUnassigned when there are
// more candidates than truth rows.
template <typename T>
std::vector<std::size_t> Match(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth);

struct MatchedPair {
  std::size_t candidate = 0;
  std::size_t truth = 0;
};

std::vector<MatchedPair> Pairs(const std::vector<std::size_t>& matching);

// Number of pairs with relative error at most rel_tol.
template <typename T>
std::size_t ExactCount(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                       const std::vector<MatchedPair>& pairs, double rel_tol = 1e-4);

// Fraction of the truth rows whose matched candidate has that row as its
// nearest neighbour among truth and pool rows. Rows without a candidate
// count as misses.
template <typename T>
double IipPixel(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                const std::vector<MatchedPair>& pairs, const Tensor<T>& pool);

struct SampleScore {
  std::size_t candidate = 0;
  std::size_t truth = 0;
  double psnr = 0.0;
  double rel_error = 0.0;
  bool exact = false;
  bool identified = false;
};

struct ScoreReport {
  std::size_t candidates = 0;
  std::size_t truth_rows = 0;
  double mean_psnr = 0.0;        // over matched pairs
  double mean_psnr_exact = 0.0;  // over exactly recovered pairs
  double iip = 0.0;
  std::size_t exact_count = 0;
  std::vector<std::size_t> matching;
  std::vector<SampleScore> samples;
};

struct ScoreOptions {
  double peak = 1.0;
  double rel_tol = 1e-4;
};

template <typename T>
ScoreReport Score(const std::vector<Tensor<T>>& cands, const Tensor<T>& truth,
                  const Tensor<T>& pool, const ScoreOptions& options = {});

}  // namespace imprintlab

#endif  // IMPRINTLAB_METRICS_H_
