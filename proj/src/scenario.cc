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

#include "imprintlab/scenario.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "imprintlab/metrics.h"
#include "imprintlab/recovery.h"
#include "imprintlab/theory.h"

namespace imprintlab {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kStreamData = 0x5ce0001;
constexpr std::uint64_t kStreamInit = 0x5ce0002;
constexpr std::uint64_t kStreamMeasure = 0x5ce0003;
constexpr std::uint64_t kStreamDefense = 0x5ce0004;
constexpr std::uint64_t kStreamPool = 0x5ce0005;
constexpr std::uint64_t kStreamSurrogate = 0x5ce0006;

// Typed access to one JSON object that remembers its field path and rejects
// keys nobody asked for.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string Path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool Has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }

  const json& Raw(const std::string& key) {
    if (!Has(key)) throw ConfigError(Path(key), "required field is missing");
    return node_.at(key);
  }

  std::string String(const std::string& key, std::optional<std::string> fallback = {}) {
    if (!Has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(Path(key), "required field is missing");
    }
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(Path(key), "expected a string");
    return v.get<std::string>();
  }

  double Number(const std::string& key, std::optional<double> fallback = {}) {
    if (!Has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(Path(key), "required field is missing");
    }
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError(Path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(Path(key), "expected a finite number");
    return d;
  }

  std::optional<double> OptionalNumber(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    return Number(key);
  }

  std::uint64_t Unsigned(const std::string& key, std::optional<std::uint64_t> fallback = {}) {
    if (!Has(key)) {
      if (fallback) return *fallback;
      throw ConfigError(Path(key), "required field is missing");
    }
    const json& v = node_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(Path(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool Bool(const std::string& key, bool fallback) {
    if (!Has(key)) return fallback;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(Path(key), "expected true or false");
    return v.get<bool>();
  }

  Reader Child(const std::string& key) { return Reader(Raw(key), Path(key)); }

  std::optional<Reader> OptionalChild(const std::string& key) {
    if (!Has(key)) return std::nullopt;
    return Reader(node_.at(key), Path(key));
  }

  template <typename E, typename F>
  E Enum(const std::string& key, const std::string& fallback, F parse) {
    const std::string name = String(key, fallback);
    try {
      return parse(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(Path(key), e.what());
    }
  }

  void RejectUnknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) throw ConfigError(Path(key), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

ModelKind ParseModelKind(const std::string& name) {
  if (name == "imprinted") return ModelKind::kImprinted;
  if (name == "logistic") return ModelKind::kLogistic;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

BridgeKind ParseBridgeKind(const std::string& name) {
  if (name == "sum") return BridgeKind::kSum;
  if (name == "identical_row") return BridgeKind::kIdenticalRow;
  throw std::invalid_argument("unknown bridge '" + name + "'");
}

FrontKind ParseFrontKind(const std::string& name) {
  if (name == "identity") return FrontKind::kIdentity;
  if (name == "avg_pool") return FrontKind::kAvgPool;
  throw std::invalid_argument("unknown front stage '" + name + "'");
}

Placement ParsePlacement(const std::string& name) {
  if (name == "binned") return Placement::kBinned;
  if (name == "one_shot") return Placement::kOneShot;
  throw std::invalid_argument("unknown placement '" + name + "'");
}

Protocol ParseProtocol(const std::string& name) {
  if (name == "fedsgd") return Protocol::kFedSgd;
  if (name == "fedavg") return Protocol::kFedAvg;
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

fs::path Resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

DatasetSpec ParseDataset(Reader r, const fs::path& base) {
  DatasetSpec d;
  d.kind = r.Enum<DatasetKind>("kind", "synthetic_gaussian", ParseDatasetKind);
  d.m = r.Unsigned("m", 0);
  d.n = r.Unsigned("n", 0);
  if (r.Has("path")) d.path = Resolve(base, r.String("path"));
  if (r.Has("columns")) {
    const json& cols = r.Raw("columns");
    if (!cols.is_array()) throw ConfigError(r.Path("columns"), "expected an array of names");
    for (const auto& c : cols) {
      if (!c.is_string()) throw ConfigError(r.Path("columns"), "column names must be strings");
      d.columns.push_back(c.get<std::string>());
    }
  }
  if (r.Has("embedding_path")) d.embedding_path = Resolve(base, r.String("embedding_path"));
  if (r.Has("tokens_path")) d.tokens_path = Resolve(base, r.String("tokens_path"));
  d.vocab = r.Unsigned("vocab", 0);
  d.embed_dim = r.Unsigned("embed_dim", 0);
  d.seq_len = r.Unsigned("seq_len", 0);
  d.normalization = r.Enum<NormalizationKind>("normalization", "none", ParseNormalizationKind);
  d.classes = r.Unsigned("classes", 0);
  d.labels = r.Enum<LabelMode>("labels", "random", ParseLabelMode);
  r.RejectUnknown();

  switch (d.kind) {
    case DatasetKind::kSyntheticGaussian:
      if (d.m == 0) throw ConfigError(r.Path("m"), "synthetic data needs m >= 1");
      if (d.n == 0) throw ConfigError(r.Path("n"), "synthetic data needs n >= 1");
      break;
    case DatasetKind::kCsv:
    case DatasetKind::kRawTensor:
      if (d.path.empty()) throw ConfigError(r.Path("path"), "file-backed data needs a path");
      break;
    case DatasetKind::kTokenSequences:
      if (d.seq_len == 0) throw ConfigError(r.Path("seq_len"), "token data needs seq_len >= 1");
      if (d.embedding_path.empty() && (d.vocab == 0 || d.embed_dim == 0)) {
        throw ConfigError(r.Path("vocab"), "synthetic embeddings need vocab and embed_dim");
      }
      if (d.tokens_path.empty() && d.n == 0) {
        throw ConfigError(r.Path("n"), "synthetic token data needs n >= 1");
      }
      if (d.normalization != NormalizationKind::kNone) {
        throw ConfigError(r.Path("normalization"), "token data must stay unnormalized");
      }
      break;
  }
  return d;
}

ImprintSpec ParseImprint(Reader r, const fs::path& base) {
  ImprintSpec s;
  s.variant = r.Enum<ImprintVariant>("variant", "relu", ParseImprintVariant);
  s.placement = r.Enum<Placement>("placement", "binned", ParsePlacement);
  s.bins = r.Unsigned("bins", s.placement == Placement::kOneShot ? 2 : 0);
  s.decoys = r.Unsigned("decoys", 0);
  if (r.Has("perm_seed")) s.perm_seed = r.Unsigned("perm_seed");
  s.measurement = r.Enum<MeasurementKind>("measurement", "mean", ParseMeasurementKind);
  s.freq = r.Unsigned("freq", 0);
  s.c0 = r.Number("c0", 1.0);
  s.p_min = r.Number("p_min", 1e-6);
  s.mass = r.OptionalNumber("mass");
  s.lower = r.OptionalNumber("lower");
  s.tau_rel = r.Number("tau_rel", 1e-9);
  if (!(s.tau_rel >= 0.0)) throw ConfigError(r.Path("tau_rel"), "must be non-negative");
  if (auto a = r.OptionalChild("assumed")) {
    s.assumed.kind = a->Enum<DistributionKind>("kind", "normal", ParseDistributionKind);
    s.assumed.location = a->OptionalNumber("location");
    s.assumed.scale = a->OptionalNumber("scale");
    s.surrogate_rows = a->Unsigned("surrogate_rows", 10000);
    if (a->Has("surrogate_path")) s.surrogate_path = Resolve(base, a->String("surrogate_path"));
    a->RejectUnknown();
    if (s.assumed.scale && !(*s.assumed.scale > 0.0)) {
      throw ConfigError(a->Path("scale"), "scale must be positive");
    }
  }
  r.RejectUnknown();

  if (!(s.c0 > 0.0)) throw ConfigError(r.Path("c0"), "c0 must be positive");
  if (s.placement == Placement::kBinned) {
    if (s.bins < 2) throw ConfigError(r.Path("bins"), "need at least 2 bins");
    if (!(s.p_min > 0.0 && s.p_min < 1.0 / static_cast<double>(s.bins))) {
      throw ConfigError(r.Path("p_min"), "p_min must lie in (0, 1/bins)");
    }
    if (s.mass || s.lower) {
      throw ConfigError(r.Path(s.mass ? "mass" : "lower"), "only one-shot placement takes a mass");
    }
  } else {
    if (s.variant != ImprintVariant::kRelu) {
      throw ConfigError(r.Path("variant"), "one-shot placement needs the relu variant");
    }
    if (s.bins != 2) throw ConfigError(r.Path("bins"), "one-shot placement uses exactly 2 rows");
    if (s.decoys != 0) throw ConfigError(r.Path("decoys"), "one-shot placement takes no decoys");
    if (s.mass && !(*s.mass > 0.0 && *s.mass < 1.0)) {
      throw ConfigError(r.Path("mass"), "mass must lie in (0, 1)");
    }
  }
  return s;
}

std::size_t FeatureWidth(std::size_t width, const std::vector<FrontStage>& front,
                         const std::string& path) {
  for (std::size_t i = 0; i < front.size(); ++i) {
    if (front[i].kind != FrontKind::kAvgPool) continue;
    if (front[i].factor == 0 || width % front[i].factor != 0) {
      throw ConfigError(path + "[" + std::to_string(i) + "].factor",
                        "does not divide width " + std::to_string(width));
    }
    width /= front[i].factor;
  }
  return width;
}

std::optional<std::size_t> RawWidth(const DatasetSpec& d) {
  if (d.kind == DatasetKind::kSyntheticGaussian) return d.m;
  if (d.kind == DatasetKind::kTokenSequences && d.embedding_path.empty()) {
    return d.seq_len * d.embed_dim;
  }
  return std::nullopt;
}

std::optional<std::size_t> BatchRows(const DatasetSpec& d) {
  if (d.kind == DatasetKind::kSyntheticGaussian) return d.n;
  if (d.kind == DatasetKind::kTokenSequences && d.tokens_path.empty()) return d.n;
  return std::nullopt;
}

}  // namespace

ScenarioConfig ParseScenario(const json& doc, const fs::path& base_dir) {
  ScenarioConfig cfg;
  cfg.source = doc;
  cfg.base_dir = base_dir;
  Reader root(doc, "");
  cfg.id = root.String("id");
  root.String("description", "");
  cfg.seed = root.Unsigned("seed", 0);
  cfg.trials = root.Unsigned("trials", 1);
  if (cfg.trials == 0) throw ConfigError("trials", "need at least one trial");
  if (root.Has("base_dir")) throw ConfigError("base_dir", "reserved field");
  cfg.dataset = ParseDataset(root.Child("dataset"), base_dir);

  Reader model = root.Child("model");
  cfg.model.kind = model.Enum<ModelKind>("kind", "imprinted", ParseModelKind);
  if (model.Has("front")) {
    const json& front = model.Raw("front");
    if (!front.is_array()) throw ConfigError(model.Path("front"), "expected an array");
    for (std::size_t i = 0; i < front.size(); ++i) {
      Reader stage(front[i], model.Path("front") + "[" + std::to_string(i) + "]");
      FrontStage s;
      s.kind = stage.Enum<FrontKind>("kind", "identity", ParseFrontKind);
      s.factor = stage.Unsigned("factor", 1);
      stage.RejectUnknown();
      if (s.factor == 0) throw ConfigError(stage.Path("factor"), "factor must be >= 1");
      cfg.model.front.push_back(s);
    }
  }
  std::size_t label_classes = 0;
  if (cfg.model.kind == ModelKind::kImprinted) {
    cfg.model.imprint = ParseImprint(model.Child("imprint"), base_dir);
    if (auto bridge = model.OptionalChild("bridge")) {
      cfg.model.bridge.kind = bridge->Enum<BridgeKind>("kind", "sum", ParseBridgeKind);
      cfg.model.bridge.out_dim = bridge->Unsigned("out_dim", 1);
      bridge->RejectUnknown();
      if (cfg.model.bridge.out_dim == 0) {
        throw ConfigError(bridge->Path("out_dim"), "must be >= 1");
      }
    }
    if (auto head = model.OptionalChild("head")) {
      cfg.model.head.classes = head->Unsigned("classes", 10);
      cfg.model.head.init_scale = head->Number("init_scale", 1.0);
      cfg.model.head.init = head->Enum<HeadInit>("init", "gaussian", ParseHeadInit);
      head->RejectUnknown();
      if (cfg.model.head.classes < 2) throw ConfigError(head->Path("classes"), "must be >= 2");
    }
    label_classes = cfg.model.head.classes;
    if (cfg.model.imprint.assumed.kind == DistributionKind::kEmpirical &&
        cfg.model.imprint.surrogate_path.empty() &&
        cfg.dataset.kind != DatasetKind::kSyntheticGaussian) {
      throw ConfigError(model.Path("imprint.assumed.surrogate_path"),
                        "empirical distribution needs surrogate data");
    }
    if (model.Has("logistic")) throw ConfigError(model.Path("logistic"), "imprinted model");
  } else {
    Reader logistic = model.Child("logistic");
    label_classes = logistic.Unsigned("classes");
    cfg.model.logistic_classes = label_classes;
    cfg.model.logistic.weight_scale = logistic.Number("weight_scale", 0.0);
    if (logistic.Has("sink_bias")) {
      cfg.model.logistic.sink_bias = logistic.Number("sink_bias");
    } else {
      const bool explicit_null = doc.at("model").at("logistic").contains("sink_bias");
      if (explicit_null) cfg.model.logistic.sink_bias.reset();
    }
    logistic.RejectUnknown();
    if (label_classes < 2) throw ConfigError(logistic.Path("classes"), "must be >= 2");
    if (!cfg.model.front.empty()) {
      throw ConfigError(model.Path("front"), "the logistic model takes raw inputs");
    }
    for (const char* key : {"imprint", "bridge", "head"}) {
      if (model.Has(key)) throw ConfigError(model.Path(key), "logistic model");
    }
  }
  model.RejectUnknown();

  if (cfg.dataset.classes == 0) cfg.dataset.classes = label_classes;
  if (cfg.dataset.classes > label_classes) {
    throw ConfigError("dataset.classes", "exceeds the model's " + std::to_string(label_classes) +
                                             " classes");
  }
  if (cfg.dataset.kind == DatasetKind::kTokenSequences && !cfg.model.front.empty()) {
    throw ConfigError("model.front", "token data is read from raw embeddings");
  }

  if (auto fed = root.OptionalChild("federation")) {
    cfg.federation.protocol = fed->Enum<Protocol>("protocol", "fedsgd", ParseProtocol);
    cfg.federation.users = fed->Unsigned("users", 1);
    cfg.federation.lr = fed->Number("lr", 1e-4);
    cfg.federation.steps = fed->Unsigned("steps", 1);
    fed->RejectUnknown();
    if (cfg.federation.users == 0) throw ConfigError(fed->Path("users"), "must be >= 1");
    if (cfg.federation.steps == 0) throw ConfigError(fed->Path("steps"), "must be >= 1");
    if (!(cfg.federation.lr >= 0.0)) throw ConfigError(fed->Path("lr"), "must be >= 0");
    if (cfg.federation.protocol == Protocol::kFedSgd && cfg.federation.steps != 1) {
      throw ConfigError(fed->Path("steps"), "fedsgd takes exactly one step");
    }
    if (const auto rows = BatchRows(cfg.dataset)) {
      if (*rows < cfg.federation.users * cfg.federation.steps) {
        throw ConfigError(fed->Path("users"), "batch of " + std::to_string(*rows) +
                                                  " cannot feed users x steps sub-batches");
      }
    }
  }
  if (auto def = root.OptionalChild("defense")) {
    cfg.defense.clip_bound = def->OptionalNumber("clip");
    cfg.defense.noise = def->Enum<NoiseKind>("noise", "none", ParseNoiseKind);
    cfg.defense.sigma = def->Number("sigma", 0.0);
    def->RejectUnknown();
    if (cfg.defense.clip_bound && !(*cfg.defense.clip_bound > 0.0)) {
      throw ConfigError(def->Path("clip"), "must be positive");
    }
    if (!(cfg.defense.sigma >= 0.0)) throw ConfigError(def->Path("sigma"), "must be >= 0");
  }
  if (auto met = root.OptionalChild("metrics")) {
    cfg.metrics.pool = met->Unsigned("pool", 1000);
    cfg.metrics.rel_tol = met->Number("rel_tol", 1e-4);
    cfg.metrics.peak = met->OptionalNumber("peak");
    met->RejectUnknown();
    if (!(cfg.metrics.rel_tol > 0.0)) throw ConfigError(met->Path("rel_tol"), "must be > 0");
    if (cfg.metrics.peak && !(*cfg.metrics.peak > 0.0)) {
      throw ConfigError(met->Path("peak"), "must be > 0");
    }
  }
  if (auto chk = root.OptionalChild("check")) {
    cfg.check.exact_matches_oracle = chk->Bool("exact_matches_oracle", false);
    cfg.check.min_mean_psnr = chk->OptionalNumber("min_mean_psnr");
    cfg.check.min_iip = chk->OptionalNumber("min_iip");
    if (auto sr = chk->OptionalChild("success_rate")) {
      cfg.check.success_target = sr->Number("target");
      cfg.check.success_tolerance = sr->Number("tolerance");
      sr->RejectUnknown();
    }
    chk->RejectUnknown();
  }
  root.RejectUnknown();

  if (const auto width = RawWidth(cfg.dataset)) {
    const std::size_t fdim = FeatureWidth(*width, cfg.model.front, "model.front");
    if (cfg.model.kind == ModelKind::kImprinted &&
        cfg.model.imprint.measurement == MeasurementKind::kDct &&
        cfg.model.imprint.freq >= fdim) {
      throw ConfigError("model.imprint.freq", "must be below the feature width " +
                                                  std::to_string(fdim));
    }
  }
  if (cfg.model.kind == ModelKind::kImprinted && cfg.model.imprint.mass) {
    if (const auto rows = BatchRows(cfg.dataset); rows && *rows == 0) {
      throw ConfigError("dataset.n", "must be >= 1");
    }
  }
  return cfg;
}

ScenarioConfig LoadScenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return ParseScenario(doc, path.parent_path());
}

namespace {

RngStream TrialStream(const ScenarioConfig& cfg, std::uint64_t id, std::size_t trial) {
  return RngStream(cfg.seed, id).Substream(trial);
}

ordered_json NumberOrNull(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

template <typename T>
Tensor<T> DistractorPool(const Tensor<T>& truth, std::size_t rows, RngStream& stream) {
  const std::size_t n = truth.rows();
  const std::size_t m = truth.cols();
  std::vector<double> mean(m, 0.0), sd(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += static_cast<double>(truth.at(i, j));
  }
  for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = static_cast<double>(truth.at(i, j)) - mean[j];
      sd[j] += d * d;
    }
  }
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(std::max<std::size_t>(n, 1)));
  Tensor<T> pool({rows, m});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      pool.at(i, j) = static_cast<T>(mean[j] + sd[j] * stream.Normal());
    }
  }
  return pool;
}

template <typename T>
double DynamicRange(const Tensor<T>& truth) {
  if (truth.size() == 0) return 1.0;
  const auto [lo, hi] = std::minmax_element(truth.values().begin(), truth.values().end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  return range > 0.0 ? range : 1.0;
}

TensorD SurrogateFeatures(const ScenarioConfig& cfg, std::size_t trial) {
  TensorD raw;
  const fs::path& path = cfg.model.imprint.surrogate_path;
  if (!path.empty()) {
    raw = path.extension() == ".csv" ? LoadCsv(path) : LoadRawTensor(path);
  } else {
    DatasetSpec spec = cfg.dataset;
    spec.n = cfg.model.imprint.surrogate_rows;
    spec.classes = 0;
    spec.tokens_path.clear();
    RngStream s = TrialStream(cfg, kStreamSurrogate, trial);
    raw = Load(spec, s).batch.x;
  }
  if (raw.rank() != 2) throw ShapeError("surrogate data must be a matrix");
  std::vector<double> feats;
  std::size_t width = 0;
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    auto f = ApplyFront<double>(cfg.model.front, raw.row(r));
    width = f.size();
    feats.insert(feats.end(), f.begin(), f.end());
  }
  return TensorD({raw.rows(), width}, std::move(feats));
}

struct BinTable {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> count;
  std::vector<std::optional<std::size_t>> bin_of_row;
};

// The hard-threshold top bin ends where its row saturates.
BinTable Occupancy(const ImprintModule& module, const std::vector<double>& values) {
  BinTable t;
  const auto& layout = module.layout;
  const std::size_t k = layout.boundaries.size();
  t.count.assign(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    t.lower.push_back(layout.boundaries[i]);
    t.upper.push_back(i + 1 < k ? layout.boundaries[i + 1]
                                : std::numeric_limits<double>::infinity());
  }
  if (module.variant == ImprintVariant::kHardThreshold) {
    t.upper.back() = layout.boundaries.back() + module.deltas.back();
  }
  for (double v : values) {
    auto bin = layout.BinOf(v);
    if (bin && !(v < t.upper[*bin])) bin.reset();
    t.bin_of_row.push_back(bin);
    if (bin) ++t.count[*bin];
  }
  return t;
}

template <typename T>
ordered_json RunTrialT(const ScenarioConfig& cfg, std::size_t trial) {
  RngStream data_stream = TrialStream(cfg, kStreamData, trial);
  LoadedData data = Load(cfg.dataset, data_stream);
  const Batch<T> batch = data.batch.Cast<T>();
  const std::size_t n = batch.size();
  if (n == 0) throw std::runtime_error("dataset is empty");
  const std::size_t width = batch.x.cols();
  const std::size_t fdim = FeatureWidth(width, cfg.model.front, "model.front");
  if (cfg.federation.users * cfg.federation.steps > n) {
    throw std::runtime_error("batch of " + std::to_string(n) + " cannot feed " +
                             std::to_string(cfg.federation.users) + " users x " +
                             std::to_string(cfg.federation.steps) + " steps");
  }

  RngStream init_stream = TrialStream(cfg, kStreamInit, trial);
  ModelGraph<T> model;
  std::optional<ImprintModule> module;
  std::size_t label_rows = 0;
  if (cfg.model.kind == ModelKind::kImprinted) {
    const auto& spec = cfg.model.imprint;
    RngStream mstream = TrialStream(cfg, kStreamMeasure, trial);
    const Measurement h = Measurement::Build(spec.measurement, fdim, spec.c0, &mstream, spec.freq);
    DataModelConfig assumed = spec.assumed;
    if (assumed.kind == DistributionKind::kEmpirical) {
      assumed.surrogate = SurrogateFeatures(cfg, trial);
    }
    const ScalarDistribution dist = AssumedDistribution(h, assumed);
    if (spec.placement == Placement::kOneShot) {
      module = FuseOneShot(dist, h, spec.mass.value_or(1.0 / static_cast<double>(n)), spec.lower);
    } else {
      const BinLayout layout = MakeLayout(dist, spec.bins, spec.p_min);
      const Camouflage camo{.decoys = spec.decoys, .perm_seed = spec.perm_seed};
      module = spec.variant == ImprintVariant::kRelu ? BuildRelu(layout, h, camo)
                                                     : BuildHardThreshold(layout, h, camo);
    }
    model = MakeImprintedModel<T>(width, cfg.model.front, *module, cfg.model.bridge,
                                  cfg.model.head, init_stream);
  } else {
    label_rows = cfg.model.logistic_classes;
    model = MakeLogisticModel<T>(width, label_rows, cfg.model.logistic, &init_stream);
  }

  const double loss = Loss(model, batch);
  const auto parts = SplitBatch(batch, cfg.federation.users);
  std::vector<UpdatePayload<T>> payloads;
  for (std::size_t u = 0; u < parts.size(); ++u) {
    UserState<T> user{.data = parts[u], .lr = cfg.federation.lr, .steps = cfg.federation.steps};
    UpdatePayload<T> payload = cfg.federation.protocol == Protocol::kFedSgd
                                   ? FedSgd(model, user)
                                   : FedAvg(model, user, SplitBatch(parts[u], user.steps));
    RngStream ds = TrialStream(cfg, kStreamDefense, trial).Substream(u);
    payloads.push_back(ApplyDefense(std::move(payload), cfg.defense, ds));
  }
  const UpdatePayload<T> aggregate = SecureAggregate(payloads, AggregationMode::kSum).aggregated;

  std::vector<RecoveredCandidate<T>> cands;
  if (module) {
    AttackMetadata meta{.imprint = *module, .expected_batch = n, .tau_rel = cfg.model.imprint.tau_rel};
    cands = RecoverImprint(aggregate, meta);
  } else {
    cands = RecoverUniqueLabels(aggregate.tensors.Get(kLinearWeight),
                                aggregate.tensors.Get(kLinearBias), label_rows,
                                cfg.model.imprint.tau_rel);
  }
  const std::size_t raw_candidates = cands.size();
  cands = SelectCandidates(std::move(cands), n);
  std::vector<Tensor<T>> vectors;
  for (const auto& c : cands) vectors.push_back(c.vector);

  const Tensor<T> truth = ForwardFeatures(model, batch);
  RngStream pool_stream = TrialStream(cfg, kStreamPool, trial);
  const Tensor<T> pool = DistractorPool(truth, cfg.metrics.pool, pool_stream);
  const ScoreOptions options{.peak = cfg.metrics.peak.value_or(DynamicRange(truth)),
                             .rel_tol = cfg.metrics.rel_tol};
  const ScoreReport score = Score(vectors, truth, pool, options);

  // Occupancy oracle: bins by the unscaled measurement in double, or labels.
  std::vector<std::size_t> bin_count;
  std::vector<std::optional<std::size_t>> bin_of_row(n);
  ordered_json bins = ordered_json::array();
  if (module) {
    std::vector<double> values(n);
    const auto& w = module->measurement.weights();
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < fdim; ++j) acc += w[j] * static_cast<double>(truth.at(r, j));
      values[r] = acc;
    }
    const BinTable table = Occupancy(*module, values);
    bin_count = table.count;
    bin_of_row = table.bin_of_row;
    for (std::size_t i = 0; i < bin_count.size(); ++i) {
      bins.push_back({{"bin", i},
                      {"lower", NumberOrNull(table.lower[i])},
                      {"upper", NumberOrNull(table.upper[i])},
                      {"count", bin_count[i]}});
    }
  } else {
    bin_count.assign(label_rows, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto label = static_cast<std::size_t>(batch.labels[r]);
      bin_of_row[r] = label;
      ++bin_count[label];
    }
    for (std::size_t i = 0; i < label_rows; ++i) bins.push_back({{"bin", i}, {"count", bin_count[i]}});
  }
  std::set<std::size_t> oracle_rows;
  std::size_t occupied = 0;
  for (std::size_t c : bin_count) occupied += c > 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (bin_of_row[r] && bin_count[*bin_of_row[r]] == 1) oracle_rows.insert(r);
  }
  std::set<std::size_t> exact_rows;
  for (const auto& s : score.samples) {
    if (s.exact) exact_rows.insert(s.truth);
  }

  ordered_json out;
  out["trial"] = trial;
  out["batch_size"] = n;
  out["feature_dim"] = fdim;
  out["loss"] = NumberOrNull(loss);
  out["raw_candidates"] = raw_candidates;
  out["candidates"] = cands.size();
  ordered_json sc;
  sc["mean_psnr"] = NumberOrNull(score.mean_psnr);
  sc["mean_psnr_exact"] = NumberOrNull(score.mean_psnr_exact);
  sc["iip"] = score.iip;
  sc["exact_count"] = score.exact_count;
  sc["peak"] = options.peak;
  ordered_json samples = ordered_json::array();
  for (const auto& s : score.samples) {
    samples.push_back({{"candidate", s.candidate},
                       {"bin", cands[s.candidate].bin},
                       {"truth", s.truth},
                       {"psnr", NumberOrNull(s.psnr)},
                       {"rel_error", NumberOrNull(s.rel_error)},
                       {"exact", s.exact},
                       {"identified", s.identified}});
  }
  sc["samples"] = std::move(samples);
  out["score"] = std::move(sc);
  ordered_json oracle;
  oracle["singletons"] = oracle_rows.size();
  oracle["singleton_fraction"] = static_cast<double>(oracle_rows.size()) / static_cast<double>(n);
  oracle["occupied_bins"] = occupied;
  oracle["exact_matches_oracle"] = exact_rows == oracle_rows;
  oracle["bins"] = std::move(bins);
  out["oracle"] = std::move(oracle);
  if (module && cfg.model.imprint.placement == Placement::kOneShot) {
    out["one_shot"] = {{"success", score.exact_count > 0},
                       {"interval_count", bin_count.empty() ? 0 : bin_count[0]}};
  }
  if (data.embedding) {
    const Tensor<T> table = data.embedding->template Cast<T>();
    std::vector<Tensor<T>> matched;
    std::vector<std::size_t> truth_of;
    std::vector<bool> exact_of;
    for (const auto& s : score.samples) {
      matched.push_back(vectors[s.candidate]);
      truth_of.push_back(s.truth);
      exact_of.push_back(s.exact);
    }
    const double radius = TokenResolveRadius(table);
    const auto gated = TokenLookup(matched, table, cfg.dataset.seq_len, radius);
    const auto nearest = TokenLookup(matched, table, cfg.dataset.seq_len);
    std::size_t correct = 0;
    std::size_t unresolved = 0;
    std::size_t nearest_correct = 0;
    std::size_t exact_correct = 0;
    for (std::size_t i = 0; i < gated.size(); ++i) {
      for (std::size_t p = 0; p < gated[i].size(); ++p) {
        const int truth_id = data.tokens[truth_of[i]][p];
        correct += gated[i][p] == truth_id;
        unresolved += gated[i][p] == kUnresolvedToken;
        nearest_correct += nearest[i][p] == truth_id;
        exact_correct += nearest[i][p] == truth_id && exact_of[i];
      }
    }
    const double total = static_cast<double>(n * cfg.dataset.seq_len);
    out["text"] = {{"token_accuracy", static_cast<double>(correct) / total},
                   {"unresolved_tokens", unresolved},
                   {"nearest_token_accuracy", static_cast<double>(nearest_correct) / total},
                   {"exact_token_accuracy", static_cast<double>(exact_correct) / total},
                   {"resolve_radius", radius}};
  }
  return out;
}

ordered_json Theory(const ScenarioConfig& cfg, std::size_t n, std::size_t fdim) {
  ordered_json t;
  t["n"] = n;
  if (cfg.model.kind != ModelKind::kImprinted) return t;
  const auto& spec = cfg.model.imprint;
  if (spec.placement == Placement::kOneShot) {
    const double mass = spec.mass.value_or(1.0 / static_cast<double>(n));
    t["mass"] = mass;
    t["one_shot_success"] = OneShotSuccess(n, mass);
    t["one_shot_optimum"] = {{"mass", OneShotArgmax(n)}, {"success", OneShotMax(n)}};
  } else {
    const std::size_t k = spec.bins;
    t["k"] = k;
    if (k > n && n > 2) {
      t["composition_model"] = ExpectedRecovery(n, k);
    } else {
      t["composition_model"] = nullptr;
    }
    t["iid_model"] = IidSingletonExpectation(n, k);
  }
  const auto o = Overhead(fdim, spec.bins, spec.decoys);
  t["overhead"] = {{"weights", o.weights}, {"biases", o.biases}, {"total", o.total}};
  return t;
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

ordered_json Summarize(const ordered_json& trials) {
  std::vector<double> psnr, iip, exact, singles, sfrac, tok, near_tok, exact_tok;
  std::size_t oracle_ok = 0;
  std::size_t shots = 0;
  std::size_t successes = 0;
  bool successes_exact = true;
  double min_iip = std::numeric_limits<double>::infinity();
  for (const auto& t : trials) {
    const auto& sc = t.at("score");
    if (!sc.at("mean_psnr").is_null()) psnr.push_back(sc.at("mean_psnr").get<double>());
    iip.push_back(sc.at("iip").get<double>());
    min_iip = std::min(min_iip, iip.back());
    exact.push_back(sc.at("exact_count").get<double>());
    singles.push_back(t.at("oracle").at("singletons").get<double>());
    sfrac.push_back(t.at("oracle").at("singleton_fraction").get<double>());
    oracle_ok += t.at("oracle").at("exact_matches_oracle").get<bool>();
    if (t.contains("one_shot")) {
      ++shots;
      if (t.at("one_shot").at("success").get<bool>()) {
        ++successes;
        for (const auto& s : sc.at("samples")) {
          if (s.at("exact").get<bool>() && s.at("rel_error").get<double>() > 1e-4) {
            successes_exact = false;
          }
        }
      }
    }
    if (t.contains("text")) {
      tok.push_back(t.at("text").at("token_accuracy").get<double>());
      near_tok.push_back(t.at("text").at("nearest_token_accuracy").get<double>());
      exact_tok.push_back(t.at("text").at("exact_token_accuracy").get<double>());
    }
  }
  ordered_json s;
  s["trials"] = trials.size();
  s["mean_psnr"] = NumberOrNull(Mean(psnr));
  s["mean_iip"] = NumberOrNull(Mean(iip));
  s["min_iip"] = NumberOrNull(min_iip);
  s["mean_exact_count"] = NumberOrNull(Mean(exact));
  s["mean_singletons"] = NumberOrNull(Mean(singles));
  s["mean_singleton_fraction"] = NumberOrNull(Mean(sfrac));
  s["exact_matches_oracle_trials"] = oracle_ok;
  s["exact_matches_oracle_all"] = oracle_ok == trials.size();
  if (shots > 0) {
    s["success_rate"] = static_cast<double>(successes) / static_cast<double>(shots);
    s["successes_exact"] = successes_exact;
  }
  if (!tok.empty()) {
    s["token_accuracy"] = Mean(tok);
    s["nearest_token_accuracy"] = Mean(near_tok);
    s["exact_token_accuracy"] = Mean(exact_tok);
  }
  return s;
}

template <typename F>
void ParallelFor(std::size_t count, std::size_t jobs, F&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ordered_json RunTrial(const ScenarioConfig& cfg, std::size_t trial, bool f64) {
  try {
    return f64 ? RunTrialT<double>(cfg, trial) : RunTrialT<float>(cfg, trial);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("scenario '" + cfg.id + "' trial " + std::to_string(trial) + ": " +
                             e.what());
  }
}

ordered_json RunScenario(const ScenarioConfig& input, const RunOptions& options) {
  ScenarioConfig cfg = input;
  if (options.seed_override) cfg.seed = *options.seed_override;
  const auto start = std::chrono::steady_clock::now();
  std::vector<ordered_json> results(cfg.trials);
  std::vector<double> seconds(cfg.trials, 0.0);
  ParallelFor(cfg.trials, options.jobs, [&](std::size_t t) {
    const auto t0 = std::chrono::steady_clock::now();
    results[t] = RunTrial(cfg, t, options.f64);
    seconds[t] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  ordered_json trials = ordered_json::array();
  for (auto& r : results) trials.push_back(std::move(r));

  ordered_json report;
  report["scenario"] = cfg.id;
  report["seed"] = cfg.seed;
  report["precision"] = options.f64 ? "float64" : "float32";
  report["config"] = ordered_json::parse(cfg.source.dump());
  report["theory"] = Theory(cfg, trials.front().at("batch_size").get<std::size_t>(),
                            trials.front().at("feature_dim").get<std::size_t>());
  report["summary"] = Summarize(trials);
  report["trials"] = std::move(trials);
  report["timing"] = {
      {"total_seconds",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
      {"trial_seconds", seconds}};
  return report;
}

ordered_json StripTiming(ordered_json report) {
  report.erase("timing");
  return report;
}

std::vector<CheckOutcome> EvaluateChecks(const ScenarioConfig& cfg, const ordered_json& report) {
  std::vector<CheckOutcome> out;
  const auto& s = report.at("summary");
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };
  if (cfg.check.exact_matches_oracle) {
    const bool ok = s.at("exact_matches_oracle_all").get<bool>();
    out.push_back({"exact set equals singleton oracle", ok,
                   std::to_string(s.at("exact_matches_oracle_trials").get<std::size_t>()) + "/" +
                       std::to_string(s.at("trials").get<std::size_t>()) + " trials"});
  }
  if (cfg.check.min_mean_psnr) {
    const double v = s.at("mean_psnr").is_null() ? -1.0 : s.at("mean_psnr").get<double>();
    out.push_back({"mean psnr >= " + fmt(*cfg.check.min_mean_psnr), v >= *cfg.check.min_mean_psnr,
                   fmt(v) + " dB"});
  }
  if (cfg.check.min_iip) {
    const double v = s.at("mean_iip").get<double>();
    out.push_back({"mean iip >= " + fmt(*cfg.check.min_iip), v >= *cfg.check.min_iip, fmt(v)});
  }
  if (cfg.check.success_target) {
    const double v = s.contains("success_rate") ? s.at("success_rate").get<double>() : -1.0;
    const bool exact = s.value("successes_exact", false);
    out.push_back({"success rate within " + fmt(cfg.check.success_tolerance) + " of " +
                       fmt(*cfg.check.success_target),
                   std::abs(v - *cfg.check.success_target) <= cfg.check.success_tolerance && exact,
                   fmt(v)});
  }
  return out;
}

SweepAxis ParseSweepAxis(const std::string& name) {
  if (name == "bins") return SweepAxis::kBins;
  if (name == "batch") return SweepAxis::kBatch;
  if (name == "sigma") return SweepAxis::kSigma;
  if (name == "placement") return SweepAxis::kPlacement;
  throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

ScenarioConfig WithSweepValue(const ScenarioConfig& cfg, SweepAxis axis, double value) {
  json doc = cfg.source;
  auto whole = [&](const char* what) {
    if (!(value >= 0.0) || std::floor(value) != value) {
      throw ConfigError(what, "sweep value must be a non-negative integer");
    }
    return static_cast<std::uint64_t>(value);
  };
  switch (axis) {
    case SweepAxis::kBins:
      if (cfg.model.kind != ModelKind::kImprinted ||
          cfg.model.imprint.placement != Placement::kBinned) {
        throw ConfigError("model.imprint.bins", "bins sweep needs a binned imprint");
      }
      doc["model"]["imprint"]["bins"] = whole("model.imprint.bins");
      break;
    case SweepAxis::kBatch:
      if (cfg.dataset.kind != DatasetKind::kSyntheticGaussian &&
          cfg.dataset.kind != DatasetKind::kTokenSequences) {
        throw ConfigError("dataset.n", "batch sweep needs generated data");
      }
      doc["dataset"]["n"] = whole("dataset.n");
      break;
    case SweepAxis::kSigma:
      doc["defense"]["sigma"] = value;
      if (!doc["defense"].contains("noise") || doc["defense"]["noise"] == "none") {
        doc["defense"]["noise"] = "laplace";
      }
      break;
    case SweepAxis::kPlacement: {
      json front = json::array();
      for (std::uint64_t i = 0; i < whole("model.front"); ++i) {
        front.push_back({{"kind", "avg_pool"}, {"factor", 2}});
      }
      doc["model"]["front"] = front;
      break;
    }
  }
  return ParseScenario(doc, cfg.base_dir);
}

std::string Sweep(const ScenarioConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                  const RunOptions& options) {
  std::vector<ScenarioConfig> points;
  for (double v : values) {
    points.push_back(WithSweepValue(cfg, axis, v));
  }
  std::vector<ordered_json> reports(points.size());
  RunOptions inner = options;
  inner.jobs = 1;
  ParallelFor(points.size(), options.jobs,
              [&](std::size_t i) { reports[i] = RunScenario(points[i], inner); });
  std::ostringstream os;
  os.precision(17);
  os << "value,n,k,predicted_composition_fraction,predicted_iid_fraction,"
        "measured_exact_fraction,singleton_fraction,mean_psnr,mean_iip\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& th = reports[i].at("theory");
    const auto& s = reports[i].at("summary");
    const double n = th.at("n").get<double>();
    os << values[i] << ',' << th.at("n").get<std::size_t>() << ',';
    if (th.contains("k")) os << th.at("k").get<std::size_t>();
    os << ',';
    if (th.contains("composition_model") && !th.at("composition_model").is_null()) {
      os << th.at("composition_model").get<double>() / n;
    }
    os << ',';
    if (th.contains("iid_model")) os << th.at("iid_model").get<double>() / n;
    os << ',' << s.at("mean_exact_count").get<double>() / n << ','
       << s.at("mean_singleton_fraction").get<double>() << ',';
    if (!s.at("mean_psnr").is_null()) os << s.at("mean_psnr").get<double>();
    os << ',' << s.at("mean_iip").get<double>() << '\n';
  }
  return os.str();
}

std::string OccupancyCsv(const ordered_json& trial) {
  std::ostringstream os;
  os.precision(17);
  os << "bin,lower,upper,count\n";
  for (const auto& b : trial.at("oracle").at("bins")) {
    os << b.at("bin").get<std::size_t>() << ',';
    if (b.contains("lower") && !b.at("lower").is_null()) os << b.at("lower").get<double>();
    os << ',';
    if (b.contains("upper") && !b.at("upper").is_null()) os << b.at("upper").get<double>();
    os << ',' << b.at("count").get<std::size_t>() << '\n';
  }
  return os.str();
}

}  // namespace imprintlab
