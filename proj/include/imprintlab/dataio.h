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

#ifndef IMPRINTLAB_DATAIO_H_
#define IMPRINTLAB_DATAIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imprintlab/model.h"
#include "imprintlab/rng.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

// Malformed input file; the message names the file and the row/column or
// byte offset at fault.
class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NormalizationKind { kNone, kStandardize, kUnitRange };

NormalizationKind ParseNormalizationKind(const std::string& name);
const char* NormalizationKindName(NormalizationKind kind);

// Per-feature affine map x' = (x - offset) / scale.
struct Normalization {
  NormalizationKind kind = NormalizationKind::kNone;
  std::vector<double> offset;
  std::vector<double> scale;

  static Normalization Fit(NormalizationKind kind, const TensorD& x);
  TensorD Apply(const TensorD& x) const;
  TensorD Invert(const TensorD& x) const;
};

enum class DatasetKind { kSyntheticGaussian, kCsv, kRawTensor, kTokenSequences };
enum class LabelMode { kRandom, kDistinct, kConstant };

DatasetKind ParseDatasetKind(const std::string& name);
const char* DatasetKindName(DatasetKind kind);
LabelMode ParseLabelMode(const std::string& name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSyntheticGaussian;
  std::size_t m = 0;  // synthetic width
  std::size_t n = 0;  // synthetic rows / token sequences
  std::filesystem::path path;        // csv or raw tensor
  std::vector<std::string> columns;  // csv columns; empty selects all
  // Token sequences: an embedding table from a raw tensor file or a
  // synthetic N(0, 1) table, and token ids from a whitespace file or uniform.
  std::filesystem::path embedding_path;
  std::filesystem::path tokens_path;
  std::size_t vocab = 0;
  std::size_t embed_dim = 0;
  std::size_t seq_len = 0;
  NormalizationKind normalization = NormalizationKind::kNone;
  std::size_t classes = 0;  // 0 leaves the batch unlabeled
  LabelMode labels = LabelMode::kRandom;
};

struct LoadedData {
  Batch<double> batch;  // normalized
  Normalization normalization;
  std::optional<TensorD> embedding;                // token data only
  std::vector<std::vector<int>> tokens;            // token data only
};

// Everything random is drawn from `stream`.
LoadedData Load(const DatasetSpec& spec, RngStream& stream);

// n x m standard-normal rows.
TensorD SyntheticGaussian(std::size_t m, std::size_t n, RngStream& stream);

// Header row required; decimal point '.', comma separated.
TensorD LoadCsv(const std::filesystem::path& path, const std::vector<std::string>& columns = {});

// Raw tensor: little-endian values in `path` with a JSON sidecar at
// `path` + ".json" declaring dtype, shape and endianness.
template <typename T>
void SaveRawTensor(const Tensor<T>& tensor, const std::filesystem::path& path);
TensorD LoadRawTensor(const std::filesystem::path& path);

std::vector<std::vector<int>> LoadTokenFile(const std::filesystem::path& path, std::size_t seq_len,
                                            std::size_t vocab);

// Concatenated embeddings, one row of seq_len * d per sequence.
TensorD EmbedTokens(const std::vector<std::vector<int>>& tokens, const TensorD& table);

// Checkpoint: `path` holds the flat little-endian parameters, `path` +
// ".json" the architecture and tensor directory.
template <typename T>
void SaveCheckpoint(const ModelGraph<T>& model, const std::filesystem::path& path);
template <typename T>
ModelGraph<T> LoadCheckpoint(const std::filesystem::path& path);

nlohmann::ordered_json ArchitectureToJson(const Architecture& arch);
Architecture ArchitectureFromJson(const nlohmann::json& j);

void SaveJson(const nlohmann::ordered_json& doc, const std::filesystem::path& path);
void SaveText(const std::string& text, const std::filesystem::path& path);

}  // namespace imprintlab

#endif  // IMPRINTLAB_DATAIO_H_
