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

#ifndef IMPRINTLAB_FEDERATION_H_
#define IMPRINTLAB_FEDERATION_H_

#include <cstddef>
#include <vector>

#include "imprintlab/model.h"

namespace imprintlab {

template <typename T>
struct UserState {
  Batch<T> data;
  double lr = 1e-4;
  std::size_t steps = 1;
};

// Contiguous split of a batch into `parts` near-equal sub-batches.
template <typename T>
std::vector<Batch<T>> SplitBatch(const Batch<T>& batch, std::size_t parts);

// fedSGD: the gradient averaged over the user's whole batch.
template <typename T>
UpdatePayload<T> FedSgd(const ModelGraph<T>& model, const UserState<T>& user);

// Per-step record of a local training run.
template <typename T>
struct FedAvgTrace {
  std::vector<UpdatePayload<T>> step_gradients;
};

// fedAVG: sequential SGD over `splits` (one step each) with the user's
// learning rate, starting from `model`. Returns theta_final - theta_initial.
// Every parameter trains, including the imprint.
template <typename T>
UpdatePayload<T> FedAvg(const ModelGraph<T>& model, const UserState<T>& user,
                        const std::vector<Batch<T>>& splits, FedAvgTrace<T>* trace = nullptr);

enum class AggregationMode {
  kSum,           // plain elementwise sum, what secure aggregation reveals
  kWeightedMean,  // sum of count-weighted payloads divided by the total count
};

template <typename T>
struct RoundResult {
  UpdatePayload<T> aggregated;
  std::vector<UpdatePayload<T>> per_user;  // only filled in debug mode
  std::size_t total_datapoints = 0;
};

// The server only ever sees the aggregate. Payloads must agree in kind and
// layout.
template <typename T>
RoundResult<T> SecureAggregate(const std::vector<UpdatePayload<T>>& payloads,
                               AggregationMode mode = AggregationMode::kSum,
                               bool debug = false);

}  // namespace imprintlab

#endif  // IMPRINTLAB_FEDERATION_H_
