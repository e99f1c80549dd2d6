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

#ifndef IMPRINTLAB_DEFENSE_H_
#define IMPRINTLAB_DEFENSE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "imprintlab/model.h"
#include "imprintlab/rng.h"

namespace imprintlab {

enum class NoiseKind { kNone, kLaplace, kGaussian };

NoiseKind ParseNoiseKind(const std::string& name);
const char* NoiseKindName(NoiseKind kind);

struct DefenseConfig {
  std::optional<double> clip_bound;  // global l2 bound over all tensors
  NoiseKind noise = NoiseKind::kNone;
  double sigma = 0.0;  // Laplace scale or Gaussian standard deviation

  void Validate() const;
  bool IsIdentity() const { return !clip_bound && (noise == NoiseKind::kNone || sigma == 0.0); }
};

// Scales the payload onto the clip ball when its global norm exceeds the
// bound, then adds iid noise to every entry in parameter order.
template <typename T>
UpdatePayload<T> ApplyDefense(UpdatePayload<T> payload, const DefenseConfig& cfg,
                              RngStream& stream);

struct DpRecoveryResult {
  double predicted = 0.0;  // sqrt(m * rows) * sigma
  double measured = 0.0;   // sd of recovered - true over all entries and trials
};

// A payload X0 of `rows` unit-variance rows of width m is clipped to norm 1,
// noised with Gaussian sigma, and rescaled by ||X0|| on the server side.
DpRecoveryResult DpRecoveryAnalysis(std::size_t rows, std::size_t m, double sigma,
                                    std::size_t trials, std::uint64_t seed);

}  // namespace imprintlab

#endif  // IMPRINTLAB_DEFENSE_H_
