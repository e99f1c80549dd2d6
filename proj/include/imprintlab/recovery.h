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

#ifndef IMPRINTLAB_RECOVERY_H_
#define IMPRINTLAB_RECOVERY_H_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "imprintlab/imprint.h"
#include "imprintlab/model.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

class NoActiveRowError : public std::runtime_error {
 public:
  NoActiveRowError() : std::runtime_error("no row with a non-zero bias gradient") {}
};

// Raised when a payload does not come from the model described by the
// attack metadata.
class MetadataMismatchError : public std::invalid_argument {
 public:
  explicit MetadataMismatchError(const std::string& what) : std::invalid_argument(what) {}
};

template <typename T>
struct RecoveredCandidate {
  Tensor<T> vector;
  std::size_t bin = 0;       // unpermuted bin (or class row) index
  double denominator = 0.0;  // bias-gradient (difference) used as divisor
  double confidence = 0.0;   // mean |row gradient| of the numerator
};

// Server-side secret state for reading an imprinted payload.
struct AttackMetadata {
  ImprintModule imprint;
  std::size_t expected_batch = 0;
  // Bins whose |denominator| is at most tau_rel * max |dL/db| are empty.
  double tau_rel = 1e-9;
};

// x = grad_W[i] / grad_b[i] for the row with the largest |grad_b[i]|.
template <typename T>
Tensor<T> RecoverSingleLinear(const Tensor<T>& grad_w, const Tensor<T>& grad_b,
                              double tau = 0.0);

// Per-row division over the first `label_rows` rows of a logistic payload.
// A class that appears once in the batch yields that example; a repeated
// class yields the dL/db-weighted average of its examples.
template <typename T>
std::vector<RecoveredCandidate<T>> RecoverUniqueLabels(const Tensor<T>& grad_w,
                                                       const Tensor<T>& grad_b,
                                                       std::size_t label_rows,
                                                       double tau_rel = 1e-9);

// ReLU imprint: candidate_l = (gW_l - gW_{l+1}) / (gb_l - gb_{l+1}) over
// bins in boundary order; the top bin is read from its row alone. Empty bins
// are suppressed and decoy rows never read. Candidates come out in
// measurement order.
template <typename T>
std::vector<RecoveredCandidate<T>> RecoverReluBins(const UpdatePayload<T>& payload,
                                                   const AttackMetadata& meta);

// Hard-threshold imprint: candidate_i = gW_i / gb_i. Parameter deltas are
// first divided by (-lr * steps) to act as a gradient proxy.
template <typename T>
std::vector<RecoveredCandidate<T>> RecoverHardThreshold(const UpdatePayload<T>& payload,
                                                        const AttackMetadata& meta);

// Dispatches on the imprint variant.
template <typename T>
std::vector<RecoveredCandidate<T>> RecoverImprint(const UpdatePayload<T>& payload,
                                                  const AttackMetadata& meta);

// The `expected_n` most confident candidates, highest first; ties keep bin
// order.
template <typename T>
std::vector<RecoveredCandidate<T>> SelectCandidates(std::vector<RecoveredCandidate<T>> cands,
                                                    std::size_t expected_n);

inline constexpr int kUnresolvedToken = -1;

// Nearest embedding row (Euclidean) for every position of every candidate.
// Each candidate must hold seq_len * d values. With a radius, positions whose
// nearest row is not strictly closer than it come back as kUnresolvedToken.
template <typename T>
std::vector<std::vector<int>> TokenLookup(const std::vector<Tensor<T>>& cands,
                                          const Tensor<T>& embedding_table,
                                          std::size_t seq_len,
                                          std::optional<double> radius = std::nullopt);

// Half the smallest distance between two embedding rows: inside it the
// nearest row is unambiguous.
template <typename T>
double TokenResolveRadius(const Tensor<T>& embedding_table);

}  // namespace imprintlab

#endif  // IMPRINTLAB_RECOVERY_H_
