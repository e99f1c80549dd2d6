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

#include "imprintlab/defense.h"

#include <cmath>
#include <stdexcept>

namespace imprintlab {

NoiseKind ParseNoiseKind(const std::string& name) {
  if (name == "none") return NoiseKind::kNone;
  if (name == "laplace") return NoiseKind::kLaplace;
  if (name == "gaussian") return NoiseKind::kGaussian;
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

const char* NoiseKindName(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone:
      return "none";
    case NoiseKind::kLaplace:
      return "laplace";
    case NoiseKind::kGaussian:
      return "gaussian";
  }
  return "?";
}

void DefenseConfig::Validate() const {
  if (clip_bound && !(*clip_bound > 0.0)) {
    throw std::invalid_argument("clip bound must be positive");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise scale must be finite and non-negative");
  }
}

template <typename T>
UpdatePayload<T> ApplyDefense(UpdatePayload<T> payload, const DefenseConfig& cfg,
                              RngStream& stream) {
  cfg.Validate();
  if (cfg.clip_bound) {
    const double norm = std::sqrt(payload.tensors.SquaredNorm());
    if (norm > *cfg.clip_bound) payload.tensors.Scale(static_cast<T>(*cfg.clip_bound / norm));
  }
  if (cfg.noise == NoiseKind::kNone || cfg.sigma == 0.0) return payload;
  for (auto& [name, tensor] : payload.tensors.entries()) {
    for (auto& v : tensor.data()) {
      const double eta =
          cfg.noise == NoiseKind::kLaplace ? stream.Laplace(cfg.sigma) : cfg.sigma * stream.Normal();
      v = static_cast<T>(static_cast<double>(v) + eta);
    }
  }
  return payload;
}

DpRecoveryResult DpRecoveryAnalysis(std::size_t rows, std::size_t m, double sigma,
                                    std::size_t trials, std::uint64_t seed) {
  if (rows == 0 || m == 0 || trials == 0) {
    throw std::invalid_argument("dp analysis needs rows, m and trials >= 1");
  }
  DpRecoveryResult result;
  result.predicted = std::sqrt(static_cast<double>(m * rows)) * sigma;
  DefenseConfig cfg{.clip_bound = 1.0, .noise = NoiseKind::kGaussian, .sigma = sigma};
  RngStream data_stream(seed, 0xd0000001);
  RngStream noise_stream(seed, 0xd0000002);
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    TensorD x0({rows, m});
    for (auto& v : x0.data()) v = data_stream.Normal();
    UpdatePayload<double> payload;
    payload.tensors.Add(kImprintWeight, x0);
    const double norm = std::sqrt(payload.tensors.SquaredNorm());
    auto defended = ApplyDefense(payload, cfg, noise_stream);
    const auto& y = defended.tensors.Get(kImprintWeight);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double err = y[i] * norm - x0[i];
      ss += err * err;
      ++count;
    }
  }
  result.measured = std::sqrt(ss / static_cast<double>(count));
  return result;
}

template UpdatePayload<float> ApplyDefense(UpdatePayload<float>, const DefenseConfig&, RngStream&);
template UpdatePayload<double> ApplyDefense(UpdatePayload<double>, const DefenseConfig&,
                                            RngStream&);

}  // namespace imprintlab
