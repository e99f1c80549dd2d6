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

#ifndef IMPRINTLAB_MODEL_H_
#define IMPRINTLAB_MODEL_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "imprintlab/imprint.h"
#include "imprintlab/rng.h"
#include "imprintlab/tensor.h"

namespace imprintlab {

// Parameter names shared by models, payloads and checkpoints.
inline constexpr char kImprintWeight[] = "imprint.weight";
inline constexpr char kImprintBias[] = "imprint.bias";
inline constexpr char kBridgeScale[] = "bridge.scale";
inline constexpr char kBridgeBias[] = "bridge.bias";
inline constexpr char kHeadWeight[] = "head.weight";
inline constexpr char kHeadBias[] = "head.bias";
inline constexpr char kLinearWeight[] = "linear.weight";
inline constexpr char kLinearBias[] = "linear.bias";

// Ordered collection of named tensors.
template <typename T>
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  void Add(std::string name, Tensor<T> tensor);
  const Tensor<T>& Get(const std::string& name) const;
  Tensor<T>& Get(const std::string& name);
  bool Has(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t TotalSize() const;

  // Same names and shapes, all zero.
  ParamSet ZerosLike() const;
  // this += alpha * other; layouts must match.
  void AddScaled(const ParamSet& other, T alpha);
  void Scale(T factor);
  double SquaredNorm() const;
  bool SameLayout(const ParamSet& other) const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Entry> entries_;
};

enum class PayloadKind { kGradient, kParamDelta };

const char* PayloadKindName(PayloadKind kind);

struct PayloadMeta {
  std::size_t batch_size = 0;   // datapoints behind the payload
  std::size_t local_steps = 1;
  double local_lr = 0.0;
  // True when tensors are a sum over users rather than a mean.
  bool is_sum = false;
};

// What a user sends back to the server.
template <typename T>
struct UpdatePayload {
  PayloadKind kind = PayloadKind::kGradient;
  ParamSet<T> tensors;
  PayloadMeta meta;
};

template <typename T>
struct Batch {
  Tensor<T> x;              // [n x m_raw]
  std::vector<int> labels;  // empty when unlabeled

  std::size_t size() const { return x.rows(); }
  // Rows [begin, end) as a new batch.
  Batch Slice(std::size_t begin, std::size_t end) const;
  template <typename U>
  Batch<U> Cast() const {
    return Batch<U>{x.template Cast<U>(), labels};
  }
};

enum class FrontKind { kIdentity, kAvgPool };

struct FrontStage {
  FrontKind kind = FrontKind::kIdentity;
  std::size_t factor = 1;
};

enum class BridgeKind { kSum, kIdenticalRow };

enum class ModelKind { kImprinted, kLogistic };

// Structure of a model without its parameter values.
struct Architecture {
  ModelKind kind = ModelKind::kImprinted;
  std::size_t input_dim = 0;  // raw input length
  std::vector<FrontStage> front;
  ImprintVariant variant = ImprintVariant::kRelu;
  double clamp_top = 1.0;
  std::size_t imprint_rows = 0;
  BridgeKind bridge = BridgeKind::kSum;
  std::size_t bridge_out = 1;
  std::size_t classes = 0;         // labels live in [0, classes)
  std::size_t logits = 0;          // classes, plus one for a sink logit
  std::size_t FeatureDim() const;  // input length after the front chain
};

template <typename T>
struct ModelGraph {
  Architecture arch;
  ParamSet<T> params;

  std::size_t ParameterCount() const { return params.TotalSize(); }
};

enum class HeadInit {
  kGaussian,     // weights ~ N(0, init_scale^2)
  kAlternating,  // weight (k, o) = +init_scale for even k, -init_scale for odd k
};

HeadInit ParseHeadInit(const std::string& name);

struct HeadConfig {
  std::size_t classes = 10;
  double init_scale = 1.0;
  HeadInit init = HeadInit::kGaussian;  // biases start at 0 either way
};

struct BridgeConfig {
  BridgeKind kind = BridgeKind::kSum;
  std::size_t out_dim = 1;  // kIdenticalRow only
};

// front chain -> imprint -> bridge (identical row elements) -> linear head
// with softmax cross-entropy.
template <typename T>
ModelGraph<T> MakeImprintedModel(std::size_t input_dim, std::vector<FrontStage> front,
                                 const ImprintModule& imprint, const BridgeConfig& bridge,
                                 const HeadConfig& head, RngStream& init);

struct LogisticInit {
  double weight_scale = 0.0;  // weights ~ N(0, weight_scale^2)
  // Extra logit that no label uses, with this bias. A large value drives the
  // softmax mass of every real class towards zero, so each class row's
  // gradient is carried by its own examples only.
  std::optional<double> sink_bias = 30.0;
};

// Standalone multinomial logistic regression: linear + bias + cross-entropy.
template <typename T>
ModelGraph<T> MakeLogisticModel(std::size_t m, std::size_t classes, const LogisticInit& init,
                                RngStream* stream = nullptr);

// Mean cross-entropy over the batch and the mean per-example gradient of every
// parameter. Subgradients of ReLU and the clamp are 0 at their kinks.
template <typename T>
std::pair<double, UpdatePayload<T>> ForwardBackward(const ModelGraph<T>& model,
                                                    const Batch<T>& batch);

// Mean cross-entropy only.
template <typename T>
double Loss(const ModelGraph<T>& model, const Batch<T>& batch);

// Inputs as seen by the imprint (after the front chain), [n x FeatureDim].
template <typename T>
Tensor<T> ForwardFeatures(const ModelGraph<T>& model, const Batch<T>& batch);

// The front chain as a linear map on a single input and its adjoint.
template <typename T>
std::vector<T> ApplyFront(const std::vector<FrontStage>& front, std::span<const T> x);
template <typename T>
std::vector<T> ApplyFrontAdjoint(const std::vector<FrontStage>& front, std::size_t input_dim,
                                 std::span<const T> y);

}  // namespace imprintlab

#endif  // IMPRINTLAB_MODEL_H_
