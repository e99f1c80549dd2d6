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

#include "imprintlab/dataio.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace imprintlab {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

fs::path Sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

template <typename T>
void AppendLittleEndian(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

template <typename T>
T ReadLittleEndian(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json ReadJsonFile(const fs::path& path) {
  const std::string text = ReadFile(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataFormatError(path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

Shape ShapeFromJson(const json& j, const fs::path& where) {
  if (!j.is_array()) throw DataFormatError(where.string() + ": shape must be an array");
  Shape shape;
  for (const auto& d : j) {
    if (!d.is_number_unsigned()) {
      throw DataFormatError(where.string() + ": shape entries must be non-negative integers");
    }
    shape.push_back(d.get<std::size_t>());
  }
  return shape;
}

DType DTypeFromName(const std::string& name, const fs::path& where) {
  if (name == "float32") return DType::kFloat32;
  if (name == "float64") return DType::kFloat64;
  throw DataFormatError(where.string() + ": unsupported dtype '" + name + "'");
}

template <typename T>
std::vector<T> DecodeValues(const std::string& bytes, std::size_t offset, std::size_t count,
                            const fs::path& where) {
  if (offset + count * sizeof(T) > bytes.size()) {
    throw DataFormatError(where.string() + ": payload ends at byte " +
                          std::to_string(bytes.size()) + ", need " +
                          std::to_string(offset + count * sizeof(T)));
  }
  std::vector<T> out(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (std::size_t i = 0; i < count; ++i) out[i] = ReadLittleEndian<T>(p + i * sizeof(T));
  return out;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

NormalizationKind ParseNormalizationKind(const std::string& name) {
  if (name == "none") return NormalizationKind::kNone;
  if (name == "standardize") return NormalizationKind::kStandardize;
  if (name == "unit_range") return NormalizationKind::kUnitRange;
  throw std::invalid_argument("unknown normalization '" + name + "'");
}

const char* NormalizationKindName(NormalizationKind kind) {
  switch (kind) {
    case NormalizationKind::kNone:
      return "none";
    case NormalizationKind::kStandardize:
      return "standardize";
    case NormalizationKind::kUnitRange:
      return "unit_range";
  }
  return "?";
}

Normalization Normalization::Fit(NormalizationKind kind, const TensorD& x) {
  Normalization norm;
  norm.kind = kind;
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  norm.offset.assign(m, 0.0);
  norm.scale.assign(m, 1.0);
  if (kind == NormalizationKind::kNone || n == 0) return norm;
  for (std::size_t j = 0; j < m; ++j) {
    if (kind == NormalizationKind::kStandardize) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (x.at(i, j) - mean) * (x.at(i, j) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      norm.offset[j] = mean;
      norm.scale[j] = sd > 0.0 ? sd : 1.0;
    } else {
      double lo = x.at(0, j);
      double hi = lo;
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, x.at(i, j));
        hi = std::max(hi, x.at(i, j));
      }
      norm.offset[j] = lo;
      norm.scale[j] = hi > lo ? hi - lo : 1.0;
    }
  }
  return norm;
}

TensorD Normalization::Apply(const TensorD& x) const {
  if (x.rank() != 2 || x.cols() != offset.size()) throw ShapeError("normalization width mismatch");
  TensorD out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = (x.at(i, j) - offset[j]) / scale[j];
  }
  return out;
}

TensorD Normalization::Invert(const TensorD& x) const {
  if (x.rank() != 2 || x.cols() != offset.size()) throw ShapeError("normalization width mismatch");
  TensorD out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(i, j) * scale[j] + offset[j];
  }
  return out;
}

DatasetKind ParseDatasetKind(const std::string& name) {
  if (name == "synthetic_gaussian") return DatasetKind::kSyntheticGaussian;
  if (name == "csv") return DatasetKind::kCsv;
  if (name == "raw_tensor") return DatasetKind::kRawTensor;
  if (name == "token_sequences") return DatasetKind::kTokenSequences;
  throw std::invalid_argument("unknown dataset kind '" + name + "'");
}

const char* DatasetKindName(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kSyntheticGaussian:
      return "synthetic_gaussian";
    case DatasetKind::kCsv:
      return "csv";
    case DatasetKind::kRawTensor:
      return "raw_tensor";
    case DatasetKind::kTokenSequences:
      return "token_sequences";
  }
  return "?";
}

LabelMode ParseLabelMode(const std::string& name) {
  if (name == "random") return LabelMode::kRandom;
  if (name == "distinct") return LabelMode::kDistinct;
  if (name == "constant") return LabelMode::kConstant;
  throw std::invalid_argument("unknown label mode '" + name + "'");
}

TensorD SyntheticGaussian(std::size_t m, std::size_t n, RngStream& stream) {
  TensorD x({n, m});
  for (auto& v : x.data()) v = stream.Normal();
  return x;
}

TensorD LoadCsv(const fs::path& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataFormatError(path.string() + ": missing header row");
  const auto header = SplitCsvLine(line);
  std::vector<std::size_t> picks;
  if (columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) picks.push_back(c);
  } else {
    for (const auto& name : columns) {
      auto it = std::find_if(header.begin(), header.end(),
                             [&](const std::string& h) { return Trim(h) == name; });
      if (it == header.end()) {
        throw DataFormatError(path.string() + ": header has no column '" + name + "'");
      }
      picks.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() != header.size()) {
      throw DataFormatError(path.string() + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
    }
    for (std::size_t c : picks) {
      const std::string cell = Trim(cells[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw DataFormatError(path.string() + ": row " + std::to_string(line_no) + " col " +
                              std::to_string(c + 1) + " ('" + Trim(header[c]) +
                              "'): not a finite number: '" + cell + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  return TensorD({rows, picks.size()}, std::move(values));
}

template <typename T>
void SaveRawTensor(const Tensor<T>& tensor, const fs::path& path) {
  std::string bytes;
  bytes.reserve(tensor.size() * sizeof(T));
  for (T v : tensor.values()) AppendLittleEndian(bytes, v);
  WriteFile(path, bytes);
  ordered_json header;
  header["dtype"] = DTypeName(DTypeOf<T>());
  header["shape"] = tensor.shape();
  header["endianness"] = "little";
  SaveJson(header, Sidecar(path));
}

TensorD LoadRawTensor(const fs::path& path) {
  const json header = ReadJsonFile(Sidecar(path));
  if (header.value("endianness", "") != "little") {
    throw DataFormatError(Sidecar(path).string() + ": endianness must be 'little'");
  }
  const DType dtype = DTypeFromName(header.value("dtype", ""), Sidecar(path));
  const Shape shape = ShapeFromJson(header.at("shape"), Sidecar(path));
  const std::size_t count = ShapeSize(shape);
  const std::string bytes = ReadFile(path);
  const std::size_t width = dtype == DType::kFloat32 ? 4 : 8;
  if (bytes.size() != count * width) {
    throw DataFormatError(path.string() + ": " + std::to_string(bytes.size()) +
                          " bytes, header declares " + ShapeToString(shape) + " " +
                          DTypeName(dtype) + " (" + std::to_string(count * width) + " bytes)");
  }
  if (dtype == DType::kFloat64) return TensorD(shape, DecodeValues<double>(bytes, 0, count, path));
  return TensorF(shape, DecodeValues<float>(bytes, 0, count, path)).Cast<double>();
}

std::vector<std::vector<int>> LoadTokenFile(const fs::path& path, std::size_t seq_len,
                                            std::size_t vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<int>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::istringstream ss(line);
    std::vector<int> seq;
    std::string tok;
    while (ss >> tok) {
      int id = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || id < 0 ||
          static_cast<std::size_t>(id) >= vocab) {
        throw DataFormatError(path.string() + ": row " + std::to_string(line_no) + " col " +
                              std::to_string(seq.size() + 1) + ": bad token id '" + tok + "'");
      }
      seq.push_back(id);
    }
    if (seq.size() != seq_len) {
      throw DataFormatError(path.string() + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(seq.size()) + " tokens, expected " +
                            std::to_string(seq_len));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

TensorD EmbedTokens(const std::vector<std::vector<int>>& tokens, const TensorD& table) {
  if (table.rank() != 2) throw ShapeError("embedding table must be a matrix");
  const std::size_t d = table.cols();
  const std::size_t len = tokens.empty() ? 0 : tokens.front().size();
  TensorD x({tokens.size(), len * d});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].size() != len) throw ShapeError("token sequences differ in length");
    for (std::size_t p = 0; p < len; ++p) {
      const auto id = static_cast<std::size_t>(tokens[i][p]);
      if (id >= table.rows()) throw std::out_of_range("token id beyond embedding table");
      for (std::size_t j = 0; j < d; ++j) x.at(i, p * d + j) = table.at(id, j);
    }
  }
  return x;
}

LoadedData Load(const DatasetSpec& spec, RngStream& stream) {
  LoadedData out;
  TensorD raw;
  switch (spec.kind) {
    case DatasetKind::kSyntheticGaussian:
      if (spec.m == 0 || spec.n == 0) {
        throw std::invalid_argument("synthetic data needs m >= 1 and n >= 1");
      }
      raw = SyntheticGaussian(spec.m, spec.n, stream);
      break;
    case DatasetKind::kCsv:
      raw = LoadCsv(spec.path, spec.columns);
      break;
    case DatasetKind::kRawTensor:
      raw = LoadRawTensor(spec.path);
      if (raw.rank() == 1) raw = raw.Reshaped({1, raw.size()});
      if (raw.rank() != 2) raw = raw.Reshaped({raw.shape()[0], raw.size() / raw.shape()[0]});
      break;
    case DatasetKind::kTokenSequences: {
      if (spec.seq_len == 0) throw std::invalid_argument("token data needs seq_len >= 1");
      TensorD table;
      if (!spec.embedding_path.empty()) {
        table = LoadRawTensor(spec.embedding_path);
        if (table.rank() != 2) throw ShapeError("embedding table must be a matrix");
        if (spec.vocab != 0 && table.rows() != spec.vocab) {
          throw ShapeError("embedding table has " + std::to_string(table.rows()) +
                           " rows, vocab is " + std::to_string(spec.vocab));
        }
      } else {
        if (spec.vocab == 0 || spec.embed_dim == 0) {
          throw std::invalid_argument("synthetic embedding needs vocab and embed_dim");
        }
        table = SyntheticGaussian(spec.embed_dim, spec.vocab, stream);
      }
      if (!spec.tokens_path.empty()) {
        out.tokens = LoadTokenFile(spec.tokens_path, spec.seq_len, table.rows());
      } else {
        out.tokens.assign(spec.n, std::vector<int>(spec.seq_len));
        for (auto& seq : out.tokens) {
          for (auto& t : seq) t = static_cast<int>(stream.UniformInt(table.rows()));
        }
      }
      raw = EmbedTokens(out.tokens, table);
      out.embedding = std::move(table);
      break;
    }
  }
  for (double v : raw.values()) {
    if (!std::isfinite(v)) throw DataFormatError("loaded data contains a non-finite value");
  }
  out.normalization = Normalization::Fit(spec.normalization, raw);
  out.batch.x = out.normalization.Apply(raw);
  if (spec.classes > 0) {
    out.batch.labels.resize(raw.rows());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
      switch (spec.labels) {
        case LabelMode::kRandom:
          out.batch.labels[i] = static_cast<int>(stream.UniformInt(spec.classes));
          break;
        case LabelMode::kDistinct:
          out.batch.labels[i] = static_cast<int>(i % spec.classes);
          break;
        case LabelMode::kConstant:
          out.batch.labels[i] = 0;
          break;
      }
    }
  }
  return out;
}

namespace {

const char* FrontKindName(FrontKind kind) {
  return kind == FrontKind::kIdentity ? "identity" : "avg_pool";
}

FrontKind ParseFrontKind(const std::string& name) {
  if (name == "identity") return FrontKind::kIdentity;
  if (name == "avg_pool") return FrontKind::kAvgPool;
  throw DataFormatError("unknown front stage '" + name + "'");
}

}  // namespace

ordered_json ArchitectureToJson(const Architecture& arch) {
  ordered_json j;
  j["kind"] = arch.kind == ModelKind::kImprinted ? "imprinted" : "logistic";
  j["input_dim"] = arch.input_dim;
  j["front"] = ordered_json::array();
  for (const auto& s : arch.front) {
    j["front"].push_back({{"kind", FrontKindName(s.kind)}, {"factor", s.factor}});
  }
  j["variant"] = ImprintVariantName(arch.variant);
  j["clamp_top"] = arch.clamp_top;
  j["imprint_rows"] = arch.imprint_rows;
  j["bridge"] = arch.bridge == BridgeKind::kSum ? "sum" : "identical_row";
  j["bridge_out"] = arch.bridge_out;
  j["classes"] = arch.classes;
  j["logits"] = arch.logits;
  return j;
}

Architecture ArchitectureFromJson(const json& j) {
  Architecture a;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "imprinted" && kind != "logistic") {
    throw DataFormatError("unknown model kind '" + kind + "'");
  }
  a.kind = kind == "imprinted" ? ModelKind::kImprinted : ModelKind::kLogistic;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  for (const auto& s : j.at("front")) {
    a.front.push_back({ParseFrontKind(s.at("kind").get<std::string>()),
                       s.at("factor").get<std::size_t>()});
  }
  a.variant = ParseImprintVariant(j.at("variant").get<std::string>());
  a.clamp_top = j.at("clamp_top").get<double>();
  a.imprint_rows = j.at("imprint_rows").get<std::size_t>();
  const std::string bridge = j.at("bridge").get<std::string>();
  if (bridge != "sum" && bridge != "identical_row") {
    throw DataFormatError("unknown bridge '" + bridge + "'");
  }
  a.bridge = bridge == "sum" ? BridgeKind::kSum : BridgeKind::kIdenticalRow;
  a.bridge_out = j.at("bridge_out").get<std::size_t>();
  a.classes = j.at("classes").get<std::size_t>();
  a.logits = j.at("logits").get<std::size_t>();
  return a;
}

template <typename T>
void SaveCheckpoint(const ModelGraph<T>& model, const fs::path& path) {
  std::string bytes;
  ordered_json header;
  header["format"] = "imprintlab-checkpoint";
  header["version"] = 1;
  header["dtype"] = DTypeName(DTypeOf<T>());
  header["endianness"] = "little";
  header["architecture"] = ArchitectureToJson(model.arch);
  header["tensors"] = ordered_json::array();
  for (const auto& [name, tensor] : model.params.entries()) {
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = tensor.shape();
    entry["offset"] = bytes.size();
    header["tensors"].push_back(entry);
    for (T v : tensor.values()) AppendLittleEndian(bytes, v);
  }
  header["bytes"] = bytes.size();
  WriteFile(path, bytes);
  SaveJson(header, Sidecar(path));
}

template <typename T>
ModelGraph<T> LoadCheckpoint(const fs::path& path) {
  const fs::path side = Sidecar(path);
  const json header = ReadJsonFile(side);
  if (header.value("format", "") != "imprintlab-checkpoint") {
    throw DataFormatError(side.string() + ": not a checkpoint header");
  }
  if (header.value("endianness", "") != "little") {
    throw DataFormatError(side.string() + ": endianness must be 'little'");
  }
  const DType dtype = DTypeFromName(header.value("dtype", ""), side);
  if (dtype != DTypeOf<T>()) {
    throw DataFormatError(side.string() + ": checkpoint is " + DTypeName(dtype) + ", requested " +
                          DTypeName(DTypeOf<T>()));
  }
  const std::string bytes = ReadFile(path);
  if (bytes.size() != header.at("bytes").get<std::size_t>()) {
    throw DataFormatError(path.string() + ": " + std::to_string(bytes.size()) +
                          " bytes, header declares " + header.at("bytes").dump());
  }
  ModelGraph<T> model;
  try {
    model.arch = ArchitectureFromJson(header.at("architecture"));
  } catch (const json::exception& e) {
    throw DataFormatError(side.string() + ": bad architecture: " + e.what());
  }
  for (const auto& entry : header.at("tensors")) {
    const Shape shape = ShapeFromJson(entry.at("shape"), side);
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    model.params.Add(entry.at("name").get<std::string>(),
                     Tensor<T>(shape, DecodeValues<T>(bytes, offset, ShapeSize(shape), path)));
  }
  return model;
}

void SaveJson(const ordered_json& doc, const fs::path& path) { WriteFile(path, doc.dump(2) + "\n"); }

void SaveText(const std::string& text, const fs::path& path) { WriteFile(path, text); }

template void SaveRawTensor(const Tensor<float>&, const fs::path&);
template void SaveRawTensor(const Tensor<double>&, const fs::path&);
template void SaveCheckpoint(const ModelGraph<float>&, const fs::path&);
template void SaveCheckpoint(const ModelGraph<double>&, const fs::path&);
template ModelGraph<float> LoadCheckpoint(const fs::path&);
template ModelGraph<double> LoadCheckpoint(const fs::path&);

}  // namespace imprintlab
