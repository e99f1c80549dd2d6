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

#include "imprintlab/recovery.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imprintlab {
namespace {

template <typename T>
double MeanAbs(std::span<const T> v) {
  double acc = 0.0;
  for (T x : v) acc += std::abs(static_cast<double>(x));
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

template <typename T>
RecoveredCandidate<T> Divide(std::vector<T> numerator, T denominator, std::size_t bin) {
  RecoveredCandidate<T> cand;
  cand.confidence = MeanAbs<T>(numerator);
  for (auto& v : numerator) v /= denominator;
  cand.vector = Tensor<T>::Vector(std::move(numerator));
  cand.bin = bin;
  cand.denominator = static_cast<double>(denominator);
  return cand;
}

template <typename T>
void CheckImprintPayload(const UpdatePayload<T>& payload, const AttackMetadata& meta) {
  if (!payload.tensors.Has(kImprintWeight) || !payload.tensors.Has(kImprintBias)) {
    throw MetadataMismatchError("payload carries no imprint gradients");
  }
  const auto& gw = payload.tensors.Get(kImprintWeight);
  const auto& gb = payload.tensors.Get(kImprintBias);
  if (gw.rank() != 2 || gw.rows() != meta.imprint.rows() ||
      gw.cols() != meta.imprint.input_dim() || gb.size() != meta.imprint.rows()) {
    throw MetadataMismatchError("imprint gradient " + ShapeToString(gw.shape()) +
                                " does not match metadata with " +
                                std::to_string(meta.imprint.rows()) + " rows");
  }
  if (meta.imprint.bins() != meta.imprint.layout.k) {
    throw MetadataMismatchError("metadata bin map is inconsistent with its layout");
  }
}

template <typename T>
double MaxAbsGenuineBias(const Tensor<T>& gb, const AttackMetadata& meta) {
  double top = 0.0;
  for (std::size_t r : meta.imprint.bin_row) {
    top = std::max(top, std::abs(static_cast<double>(gb[r])));
  }
  return top;
}

}  // namespace

template <typename T>
Tensor<T> RecoverSingleLinear(const Tensor<T>& grad_w, const Tensor<T>& grad_b, double tau) {
  if (grad_w.rank() != 2 || grad_w.rows() != grad_b.size()) {
    throw ShapeError("single-linear recovery: " + ShapeToString(grad_w.shape()) + " vs " +
                     ShapeToString(grad_b.shape()));
  }
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t i = 0; i < grad_b.size(); ++i) {
    const double a = std::abs(static_cast<double>(grad_b[i]));
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (!(best_abs > tau)) throw NoActiveRowError();
  const auto row = grad_w.row(best);
  return Divide(std::vector<T>(row.begin(), row.end()), grad_b[best], best).vector;
}

template <typename T>
std::vector<RecoveredCandidate<T>> RecoverUniqueLabels(const Tensor<T>& grad_w,
                                                       const Tensor<T>& grad_b,
                                                       std::size_t label_rows,
                                                       double tau_rel) {
  if (grad_w.rank() != 2 || grad_w.rows() != grad_b.size() || label_rows > grad_b.size()) {
    throw ShapeError("unique-label recovery: " + ShapeToString(grad_w.shape()) + " vs " +
                     ShapeToString(grad_b.shape()));
  }
  double top = 0.0;
  for (std::size_t i = 0; i < label_rows; ++i) {
    top = std::max(top, std::abs(static_cast<double>(grad_b[i])));
  }
  std::vector<RecoveredCandidate<T>> out;
  for (std::size_t i = 0; i < label_rows; ++i) {
    if (!(std::abs(static_cast<double>(grad_b[i])) > tau_rel * top) || top == 0.0) continue;
    const auto row = grad_w.row(i);
    out.push_back(Divide(std::vector<T>(row.begin(), row.end()), grad_b[i], i));
  }
  return out;
}

template <typename T>
std::vector<RecoveredCandidate<T>> RecoverReluBins(const UpdatePayload<T>& payload,
                                                   const AttackMetadata& meta) {
  CheckImprintPayload(payload, meta);
  if (meta.imprint.variant != ImprintVariant::kRelu) {
    throw MetadataMismatchError("row-difference recovery needs a ReLU imprint");
  }
  const auto& gw = payload.tensors.Get(kImprintWeight);
  const auto& gb = payload.tensors.Get(kImprintBias);
  const auto& rows = meta.imprint.bin_row;
  const std::size_t k = rows.size();
  const std::size_t m = gw.cols();
  const double floor = meta.tau_rel * MaxAbsGenuineBias(gb, meta);

  std::vector<RecoveredCandidate<T>> out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = rows[i];
    std::vector<T> num(m);
    T den;
    if (i + 1 < k) {
      const std::size_t next = rows[i + 1];
      for (std::size_t j = 0; j < m; ++j) num[j] = gw.at(r, j) - gw.at(next, j);
      den = gb[r] - gb[next];
    } else {
      for (std::size_t j = 0; j < m; ++j) num[j] = gw.at(r, j);
      den = gb[r];
    }
    if (!(std::abs(static_cast<double>(den)) > floor) || den == T(0)) continue;
    out.push_back(Divide(std::move(num), den, i));
  }
  return out;
}

template <typename T>
std::vector<RecoveredCandidate<T>> RecoverHardThreshold(const UpdatePayload<T>& payload,
                                                        const AttackMetadata& meta) {
  CheckImprintPayload(payload, meta);
  if (meta.imprint.variant != ImprintVariant::kHardThreshold) {
    throw MetadataMismatchError("sparse-row recovery needs a hard-threshold imprint");
  }
  const auto& gw = payload.tensors.Get(kImprintWeight);
  const auto& gb = payload.tensors.Get(kImprintBias);
  T proxy = T(1);
  if (payload.kind == PayloadKind::kParamDelta) {
    const double step = payload.meta.local_lr * static_cast<double>(payload.meta.local_steps);
    if (step == 0.0) {
      throw MetadataMismatchError("parameter delta with zero learning rate carries no signal");
    }
    proxy = static_cast<T>(-1.0 / step);
  }
  const auto& rows = meta.imprint.bin_row;
  const std::size_t m = gw.cols();
  const double floor =
      meta.tau_rel * MaxAbsGenuineBias(gb, meta) * std::abs(static_cast<double>(proxy));

  std::vector<RecoveredCandidate<T>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::vector<T> num(m);
    for (std::size_t j = 0; j < m; ++j) num[j] = gw.at(r, j) * proxy;
    const T den = gb[r] * proxy;
    if (!(std::abs(static_cast<double>(den)) > floor) || den == T(0)) continue;
    out.push_back(Divide(std::move(num), den, i));
  }
  return out;
}

template <typename T>
std::vector<RecoveredCandidate<T>> RecoverImprint(const UpdatePayload<T>& payload,
                                                  const AttackMetadata& meta) {
  return meta.imprint.variant == ImprintVariant::kRelu ? RecoverReluBins(payload, meta)
                                                       : RecoverHardThreshold(payload, meta);
}

template <typename T>
std::vector<RecoveredCandidate<T>> SelectCandidates(std::vector<RecoveredCandidate<T>> cands,
                                                    std::size_t expected_n) {
  std::stable_sort(cands.begin(), cands.end(),
                   [](const RecoveredCandidate<T>& a, const RecoveredCandidate<T>& b) {
                     if (a.confidence != b.confidence) return a.confidence > b.confidence;
                     return a.bin < b.bin;
                   });
  if (cands.size() > expected_n) cands.resize(expected_n);
  return cands;
}

template <typename T>
std::vector<std::vector<int>> TokenLookup(const std::vector<Tensor<T>>& cands,
                                          const Tensor<T>& embedding_table,
                                          std::size_t seq_len, std::optional<double> radius) {
  if (embedding_table.rank() != 2) throw ShapeError("embedding table must be a matrix");
  const std::size_t vocab = embedding_table.rows();
  const std::size_t d = embedding_table.cols();
  std::vector<std::vector<int>> out;
  out.reserve(cands.size());
  for (const auto& cand : cands) {
    if (cand.size() != seq_len * d) {
      throw ShapeError("candidate of length " + std::to_string(cand.size()) +
                       " is not seq_len * d = " + std::to_string(seq_len * d));
    }
    std::vector<int> ids(seq_len);
    for (std::size_t p = 0; p < seq_len; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < vocab; ++v) {
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = static_cast<double>(cand[p * d + j]) -
                              static_cast<double>(embedding_table.at(v, j));
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          ids[p] = static_cast<int>(v);
        }
      }
      if (radius && !(std::sqrt(best) < *radius)) ids[p] = kUnresolvedToken;
    }
    out.push_back(std::move(ids));
  }
  return out;
}

template <typename T>
double TokenResolveRadius(const Tensor<T>& embedding_table) {
  const std::size_t vocab = embedding_table.rows();
  if (vocab < 2) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < vocab; ++a) {
    for (std::size_t b = a + 1; b < vocab; ++b) {
      double dist = 0.0;
      for (std::size_t j = 0; j < embedding_table.cols(); ++j) {
        const double diff = static_cast<double>(embedding_table.at(a, j)) -
                            static_cast<double>(embedding_table.at(b, j));
        dist += diff * diff;
      }
      best = std::min(best, dist);
    }
  }
  return 0.5 * std::sqrt(best);
}

#define IMPRINTLAB_INSTANTIATE(T)                                                            \
  template Tensor<T> RecoverSingleLinear(const Tensor<T>&, const Tensor<T>&, double);        \
  template std::vector<RecoveredCandidate<T>> RecoverUniqueLabels(                           \
      const Tensor<T>&, const Tensor<T>&, std::size_t, double);                              \
  template std::vector<RecoveredCandidate<T>> RecoverReluBins(const UpdatePayload<T>&,       \
                                                              const AttackMetadata&);        \
  template std::vector<RecoveredCandidate<T>> RecoverHardThreshold(const UpdatePayload<T>&,  \
                                                                   const AttackMetadata&);   \
  template std::vector<RecoveredCandidate<T>> RecoverImprint(const UpdatePayload<T>&,        \
                                                             const AttackMetadata&);         \
  template std::vector<RecoveredCandidate<T>> SelectCandidates(                              \
      std::vector<RecoveredCandidate<T>>, std::size_t);                                      \
  template std::vector<std::vector<int>> TokenLookup(const std::vector<Tensor<T>>&,          \
                                                     const Tensor<T>&, std::size_t,      \
                                                     std::optional<double>);                 \
  template double TokenResolveRadius(const Tensor<T>&);
IMPRINTLAB_INSTANTIATE(float)
IMPRINTLAB_INSTANTIATE(double)
#undef IMPRINTLAB_INSTANTIATE

}  // namespace imprintlab
