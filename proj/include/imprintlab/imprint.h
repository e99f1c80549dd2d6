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

#ifndef IMPRINTLAB_IMPRINT_H_
#define IMPRINTLAB_IMPRINT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imprintlab/distributions.h"
#include "imprintlab/measurement.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

// Boundaries c_0 < ... < c_{k-1} of the measurement bins. Bin i is
// (c_i, c_{i+1}); the last bin is (c_{k-1}, inf).
struct BinLayout {
  std::size_t k = 0;
  std::vector<double> boundaries;
  std::vector<double> probabilities;

  // Bin holding value v, or nullopt when v <= c_0 (uncovered lower tail).
  std::optional<std::size_t> BinOf(double v) const;
};

// p_i = max(i/k, p_min), c_i = quantile(p_i) for i = 0..k-1.
BinLayout MakeLayout(const ScalarDistribution& d, std::size_t k, double p_min = 1e-6);

enum class ImprintVariant { kRelu, kHardThreshold };

ImprintVariant ParseImprintVariant(const std::string& name);
const char* ImprintVariantName(ImprintVariant variant);

struct Camouflage {
  std::size_t decoys = 0;
  // Shuffles all rows (genuine and decoy) when set; also seeds the decoys.
  std::optional<std::uint64_t> perm_seed;
};

// Parameters of the malicious layer plus the server-side secrets needed to
// read its gradients back out.
struct ImprintModule {
  ImprintVariant variant = ImprintVariant::kRelu;
  TensorD weight;  // [rows x m]
  TensorD bias;    // [rows]
  // Upper clamp of the threshold nonlinearity (kHardThreshold only).
  double clamp_top = 1.0;
  BinLayout layout;
  Measurement measurement;
  std::vector<double> deltas;       // bin widths, kHardThreshold only
  std::vector<std::size_t> bin_row;  // bin i lives in row bin_row[i]
  std::vector<std::size_t> decoy_rows;

  std::size_t rows() const { return weight.rows(); }
  std::size_t input_dim() const { return weight.cols(); }
  std::size_t bins() const { return bin_row.size(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
};

// ReLU imprint: every genuine row is c0 * w and bias -c0 * c_i, so row i is
// active exactly when h(x) > c_i.
ImprintModule BuildRelu(const BinLayout& layout, const Measurement& h,
                        const Camouflage& camouflage = {});

// Sparse imprint for multi-step local training: row i is c0 * w / delta_i with
// bias -c0 * c_i / delta_i and the nonlinearity clamps to [0, c0], so the
// linear region of row i is exactly bin i. The last bin reuses the previous
// width.
ImprintModule BuildHardThreshold(const BinLayout& layout, const Measurement& h,
                                 const Camouflage& camouflage = {});

// Two-row ReLU module whose row difference isolates the data with h(x) in an
// interval of mass `mass`. The interval starts at probability `lower`, which
// defaults to the centred (1 - mass) / 2.
ImprintModule FuseOneShot(const ScalarDistribution& d, const Measurement& h, double mass,
                          std::optional<double> lower = std::nullopt);

}  // namespace imprintlab

#endif  // IMPRINTLAB_IMPRINT_H_
