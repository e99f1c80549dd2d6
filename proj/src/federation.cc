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

#include "imprintlab/federation.h"

#include <stdexcept>
#include <string>

namespace imprintlab {

template <typename T>
std::vector<Batch<T>> SplitBatch(const Batch<T>& batch, std::size_t parts) {
  if (parts == 0 || parts > batch.size()) {
    throw std::invalid_argument("cannot split " + std::to_string(batch.size()) +
                                " points into " + std::to_string(parts) + " sub-batches");
  }
  std::vector<Batch<T>> out;
  const std::size_t base = batch.size() / parts;
  const std::size_t extra = batch.size() % parts;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out.push_back(batch.Slice(begin, begin + len));
    begin += len;
  }
  return out;
}

template <typename T>
UpdatePayload<T> FedSgd(const ModelGraph<T>& model, const UserState<T>& user) {
  if (user.steps != 1) throw std::invalid_argument("fedSGD takes exactly one step");
  auto payload = ForwardBackward(model, user.data).second;
  payload.meta.local_lr = user.lr;
  return payload;
}

template <typename T>
UpdatePayload<T> FedAvg(const ModelGraph<T>& model, const UserState<T>& user,
                        const std::vector<Batch<T>>& splits, FedAvgTrace<T>* trace) {
  if (!(user.lr >= 0.0)) throw std::invalid_argument("local learning rate must be >= 0");
  if (splits.empty()) throw std::invalid_argument("fedAVG needs at least one sub-batch");
  ModelGraph<T> local = model;
  std::size_t total = 0;
  for (const auto& sub : splits) {
    if (sub.size() == 0) throw std::invalid_argument("empty sub-batch in fedAVG split");
    auto grad = ForwardBackward(local, sub).second;
    local.params.AddScaled(grad.tensors, static_cast<T>(-user.lr));
    total += sub.size();
    if (trace != nullptr) trace->step_gradients.push_back(std::move(grad));
  }
  UpdatePayload<T> delta;
  delta.kind = PayloadKind::kParamDelta;
  delta.tensors = std::move(local.params);
  delta.tensors.AddScaled(model.params, T(-1));
  delta.meta.batch_size = total;
  delta.meta.local_steps = splits.size();
  delta.meta.local_lr = user.lr;
  return delta;
}

template <typename T>
RoundResult<T> SecureAggregate(const std::vector<UpdatePayload<T>>& payloads,
                               AggregationMode mode, bool debug) {
  if (payloads.empty()) throw std::invalid_argument("secure aggregation needs a payload");
  RoundResult<T> result;
  const auto& first = payloads.front();
  result.aggregated.kind = first.kind;
  result.aggregated.tensors = first.tensors.ZerosLike();
  result.aggregated.meta = first.meta;
  for (const auto& p : payloads) {
    if (p.kind != first.kind) throw std::invalid_argument("cannot aggregate mixed payload kinds");
    if (!p.tensors.SameLayout(first.tensors)) throw ShapeError("payload layouts differ");
    result.total_datapoints += p.meta.batch_size;
  }
  for (const auto& p : payloads) {
    const T weight = mode == AggregationMode::kSum
                         ? T(1)
                         : static_cast<T>(p.meta.batch_size) /
                               static_cast<T>(result.total_datapoints);
    result.aggregated.tensors.AddScaled(p.tensors, weight);
  }
  result.aggregated.meta.batch_size = result.total_datapoints;
  result.aggregated.meta.is_sum = mode == AggregationMode::kSum && payloads.size() > 1;
  if (debug) result.per_user = payloads;
  return result;
}

#define IMPRINTLAB_INSTANTIATE(T)                                                        \
  template std::vector<Batch<T>> SplitBatch(const Batch<T>&, std::size_t);               \
  template UpdatePayload<T> FedSgd(const ModelGraph<T>&, const UserState<T>&);           \
  template UpdatePayload<T> FedAvg(const ModelGraph<T>&, const UserState<T>&,            \
                                   const std::vector<Batch<T>>&, FedAvgTrace<T>*);       \
  template RoundResult<T> SecureAggregate(const std::vector<UpdatePayload<T>>&,          \
                                          AggregationMode, bool);
IMPRINTLAB_INSTANTIATE(float)
IMPRINTLAB_INSTANTIATE(double)
#undef IMPRINTLAB_INSTANTIATE

}  // namespace imprintlab
