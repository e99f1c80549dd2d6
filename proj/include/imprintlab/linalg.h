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

#ifndef IMPRINTLAB_LINALG_H_
#define IMPRINTLAB_LINALG_H_

#include <cstddef>
#include <limits>
#include <vector>

#include "imprintlab/rng.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

// Standard product of [n x k] and [k x m]; summation runs sequentially over k.
template <typename T>
Tensor<T> Matmul(const Tensor<T>& a, const Tensor<T>& b);

// Type-II DCT basis row of length m with scale 4/m:
//   entry j = (4/m) * cos(pi * freq * (2j + 1) / (2m)).
TensorD DctRow(std::size_t m, std::size_t freq);

// iid standard normal entries drawn from `stream`.
template <typename T>
Tensor<T> RandGaussian(RngStream& stream, Shape shape);

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

// Minimum-cost assignment of rows to columns (Hungarian method with
// potentials, O(min^2 max)). Returns, for each row, the assigned column. With
// more rows than columns every column is used once and the leftover rows come
// back as kUnassigned. Throws std::invalid_argument on non-finite costs.
std::vector<std::size_t> SolveAssignment(const TensorD& cost);

double AssignmentCost(const TensorD& cost, const std::vector<std::size_t>& assignment);

}  // namespace imprintlab

#endif  // IMPRINTLAB_LINALG_H_
