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

#include "imprintlab/imprint.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "imprintlab/rng.h"

namespace imprintlab {
namespace {

constexpr std::uint64_t kCamouflageStream = 0x1a7b'0001;

void RequireIncreasing(const std::vector<double>& c) {
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    if (!(c[i] < c[i + 1])) {
      std::ostringstream msg;
      msg << "bin boundaries not strictly increasing at " << i << ": " << c[i]
          << " >= " << c[i + 1];
      throw std::invalid_argument(msg.str());
    }
  }
}

// Appends decoys and applies the optional row permutation. Genuine rows come
// in bin order in `weight`/`bias` on entry.
void ApplyCamouflage(const Camouflage& camouflage, ImprintModule* module) {
  const std::size_t k = module->layout.k;
  const std::size_t m = module->input_dim();
  const std::size_t rows = k + camouflage.decoys;
  RngStream stream(camouflage.perm_seed.value_or(0), kCamouflageStream);

  TensorD weight(Shape{rows, m});
  TensorD bias(Shape{rows});
  std::copy(module->weight.data().begin(), module->weight.data().end(),
            weight.data().begin());
  std::copy(module->bias.data().begin(), module->bias.data().end(), bias.data().begin());
  const double sd = std::pow(static_cast<double>(m), -0.25);
  const double lo = module->bias[0];
  const double hi = module->bias[k - 1];
  for (std::size_t r = k; r < rows; ++r) {
    for (auto& v : weight.row(r)) v = sd * stream.Normal();
    bias[r] = std::min(lo, hi) + std::abs(hi - lo) * stream.Uniform();
  }

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  if (camouflage.perm_seed.has_value()) {
    for (std::size_t i = rows - 1; i > 0; --i) {
      std::swap(order[i], order[stream.UniformInt(i + 1)]);
    }
  }
  // order[new_row] = old_row.
  module->weight = TensorD(Shape{rows, m});
  module->bias = TensorD(Shape{rows});
  module->bin_row.assign(k, 0);
  module->decoy_rows.clear();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t old = order[r];
    std::copy(weight.row(old).begin(), weight.row(old).end(), module->weight.row(r).begin());
    module->bias[r] = bias[old];
    if (old < k) {
      module->bin_row[old] = r;
    } else {
      module->decoy_rows.push_back(r);
    }
  }
}

}  // namespace

std::optional<std::size_t> BinLayout::BinOf(double v) const {
  if (boundaries.empty() || !(v > boundaries.front())) return std::nullopt;
  const auto it = std::lower_bound(boundaries.begin(), boundaries.end(), v);
  return static_cast<std::size_t>(it - boundaries.begin()) - 1;
}

BinLayout MakeLayout(const ScalarDistribution& d, std::size_t k, double p_min) {
  if (k < 2) throw std::invalid_argument("bin layout needs k >= 2");
  if (!(p_min > 0.0 && p_min < 1.0 / static_cast<double>(k))) {
    throw std::invalid_argument("p_min must lie in (0, 1/k)");
  }
  BinLayout layout;
  layout.k = k;
  for (std::size_t i = 0; i < k; ++i) {
    const double p = std::max(static_cast<double>(i) / static_cast<double>(k), p_min);
    layout.probabilities.push_back(p);
    layout.boundaries.push_back(d.Quantile(p));
  }
  RequireIncreasing(layout.boundaries);
  return layout;
}

ImprintVariant ParseImprintVariant(const std::string& name) {
  if (name == "relu") return ImprintVariant::kRelu;
  if (name == "hard_threshold") return ImprintVariant::kHardThreshold;
  throw std::invalid_argument("unknown imprint variant '" + name + "'");
}

const char* ImprintVariantName(ImprintVariant variant) {
  return variant == ImprintVariant::kRelu ? "relu" : "hard_threshold";
}

ImprintModule BuildRelu(const BinLayout& layout, const Measurement& h,
                        const Camouflage& camouflage) {
  RequireIncreasing(layout.boundaries);
  const std::size_t k = layout.k;
  const std::size_t m = h.dim();
  const double gain = h.c0();
  ImprintModule module{.variant = ImprintVariant::kRelu,
                       .weight = TensorD(Shape{k, m}),
                       .bias = TensorD(Shape{k}),
                       .clamp_top = 1.0,
                       .layout = layout,
                       .measurement = h,
                       .deltas = {},
                       .bin_row = {},
                       .decoy_rows = {}};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < m; ++j) module.weight.at(i, j) = gain * h.weights()[j];
    module.bias[i] = -gain * layout.boundaries[i];
  }
  ApplyCamouflage(camouflage, &module);
  return module;
}

ImprintModule BuildHardThreshold(const BinLayout& layout, const Measurement& h,
                                 const Camouflage& camouflage) {
  RequireIncreasing(layout.boundaries);
  const std::size_t k = layout.k;
  if (k < 2) throw std::invalid_argument("hard-threshold imprint needs k >= 2");
  const std::size_t m = h.dim();
  const double gain = h.c0();
  ImprintModule module{.variant = ImprintVariant::kHardThreshold,
                       .weight = TensorD(Shape{k, m}),
                       .bias = TensorD(Shape{k}),
                       .clamp_top = gain,
                       .layout = layout,
                       .measurement = h,
                       .deltas = {},
                       .bin_row = {},
                       .decoy_rows = {}};
  const auto& c = layout.boundaries;
  for (std::size_t i = 0; i < k; ++i) {
    const double delta = i + 1 < k ? c[i + 1] - c[i] : c[k - 1] - c[k - 2];
    if (!(delta > 0.0)) throw std::invalid_argument("degenerate bin width");
    module.deltas.push_back(delta);
    for (std::size_t j = 0; j < m; ++j) {
      module.weight.at(i, j) = gain * h.weights()[j] / delta;
    }
    module.bias[i] = -gain * c[i] / delta;
  }
  ApplyCamouflage(camouflage, &module);
  return module;
}

ImprintModule FuseOneShot(const ScalarDistribution& d, const Measurement& h, double mass,
                          std::optional<double> lower) {
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("one-shot mass must lie in (0, 1)");
  const double q = lower.value_or((1.0 - mass) / 2.0);
  if (!(q > 0.0 && q + mass < 1.0)) {
    throw std::invalid_argument("one-shot interval must lie strictly inside (0, 1)");
  }
  BinLayout layout;
  layout.k = 2;
  layout.probabilities = {q, q + mass};
  layout.boundaries = {d.Quantile(q), d.Quantile(q + mass)};
  return BuildRelu(layout, h);
}

}  // namespace imprintlab
