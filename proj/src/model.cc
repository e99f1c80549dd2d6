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

#include "imprintlab/model.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace imprintlab {

// ---------------------------------------------------------------- ParamSet

template <typename T>
void ParamSet<T>::Add(std::string name, Tensor<T> tensor) {
  if (Has(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

template <typename T>
const Tensor<T>& ParamSet<T>::Get(const std::string& name) const {
  for (const auto& [key, tensor] : entries_) {
    if (key == name) return tensor;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <typename T>
Tensor<T>& ParamSet<T>::Get(const std::string& name) {
  return const_cast<Tensor<T>&>(std::as_const(*this).Get(name));
}

template <typename T>
bool ParamSet<T>::Has(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.first == name; });
}

template <typename T>
std::size_t ParamSet<T>::TotalSize() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.second.size();
  return total;
}

template <typename T>
ParamSet<T> ParamSet<T>::ZerosLike() const {
  ParamSet out;
  for (const auto& [name, tensor] : entries_) out.Add(name, Tensor<T>(tensor.shape()));
  return out;
}

template <typename T>
bool ParamSet<T>::SameLayout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.shape() != other.entries_[i].second.shape()) {
      return false;
    }
  }
  return true;
}

template <typename T>
void ParamSet<T>::AddScaled(const ParamSet& other, T alpha) {
  if (!SameLayout(other)) throw ShapeError("parameter sets have different layouts");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].second.data();
    auto src = other.entries_[i].second.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += alpha * src[j];
  }
}

template <typename T>
void ParamSet<T>::Scale(T factor) {
  for (auto& e : entries_) {
    for (auto& v : e.second.data()) v *= factor;
  }
}

template <typename T>
double ParamSet<T>::SquaredNorm() const {
  double acc = 0.0;
  for (const auto& e : entries_) {
    for (T v : e.second.data()) acc += static_cast<double>(v) * static_cast<double>(v);
  }
  return acc;
}

template class ParamSet<float>;
template class ParamSet<double>;

const char* PayloadKindName(PayloadKind kind) {
  return kind == PayloadKind::kGradient ? "gradient" : "param_delta";
}

template <typename T>
Batch<T> Batch<T>::Slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("batch slice out of range");
  const std::size_t m = x.cols();
  std::vector<T> rows(x.values().begin() + begin * m, x.values().begin() + end * m);
  Batch out{Tensor<T>(Shape{end - begin, m}, std::move(rows)), {}};
  if (!labels.empty()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
  return out;
}

template struct Batch<float>;
template struct Batch<double>;

// ------------------------------------------------------------ front chain

std::size_t Architecture::FeatureDim() const {
  std::size_t dim = input_dim;
  for (const auto& stage : front) {
    if (stage.kind == FrontKind::kAvgPool) dim /= stage.factor;
  }
  return dim;
}

namespace {

void ValidateFront(std::size_t input_dim, const std::vector<FrontStage>& front) {
  std::size_t dim = input_dim;
  for (const auto& stage : front) {
    if (stage.kind != FrontKind::kAvgPool) continue;
    if (stage.factor == 0 || dim % stage.factor != 0) {
      throw ShapeError("avgpool factor " + std::to_string(stage.factor) +
                       " does not divide length " + std::to_string(dim));
    }
    dim /= stage.factor;
  }
}

}  // namespace

template <typename T>
std::vector<T> ApplyFront(const std::vector<FrontStage>& front, std::span<const T> x) {
  std::vector<T> cur(x.begin(), x.end());
  for (const auto& stage : front) {
    if (stage.kind == FrontKind::kIdentity) continue;
    const std::size_t f = stage.factor;
    if (f == 0 || cur.size() % f != 0) throw ShapeError("avgpool factor does not divide input");
    std::vector<T> next(cur.size() / f);
    for (std::size_t j = 0; j < next.size(); ++j) {
      T acc = 0;
      for (std::size_t q = 0; q < f; ++q) acc += cur[j * f + q];
      next[j] = acc / static_cast<T>(f);
    }
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
std::vector<T> ApplyFrontAdjoint(const std::vector<FrontStage>& front, std::size_t input_dim,
                                 std::span<const T> y) {
  std::vector<std::size_t> dims{input_dim};
  for (const auto& stage : front) {
    dims.push_back(stage.kind == FrontKind::kAvgPool ? dims.back() / stage.factor
                                                     : dims.back());
  }
  if (y.size() != dims.back()) throw ShapeError("front adjoint: output length mismatch");
  std::vector<T> cur(y.begin(), y.end());
  for (std::size_t s = front.size(); s-- > 0;) {
    if (front[s].kind == FrontKind::kIdentity) continue;
    const std::size_t f = front[s].factor;
    std::vector<T> prev(dims[s]);
    for (std::size_t i = 0; i < prev.size(); ++i) prev[i] = cur[i / f] / static_cast<T>(f);
    cur = std::move(prev);
  }
  return cur;
}

template std::vector<float> ApplyFront(const std::vector<FrontStage>&, std::span<const float>);
template std::vector<double> ApplyFront(const std::vector<FrontStage>&, std::span<const double>);
template std::vector<float> ApplyFrontAdjoint(const std::vector<FrontStage>&, std::size_t,
                                              std::span<const float>);
template std::vector<double> ApplyFrontAdjoint(const std::vector<FrontStage>&, std::size_t,
                                               std::span<const double>);

// ----------------------------------------------------------- construction

HeadInit ParseHeadInit(const std::string& name) {
  if (name == "gaussian") return HeadInit::kGaussian;
  if (name == "alternating") return HeadInit::kAlternating;
  throw std::invalid_argument("unknown head init '" + name + "'");
}

template <typename T>
ModelGraph<T> MakeImprintedModel(std::size_t input_dim, std::vector<FrontStage> front,
                                 const ImprintModule& imprint, const BridgeConfig& bridge,
                                 const HeadConfig& head, RngStream& init) {
  ValidateFront(input_dim, front);
  ModelGraph<T> model;
  model.arch.kind = ModelKind::kImprinted;
  model.arch.input_dim = input_dim;
  model.arch.front = std::move(front);
  if (model.arch.FeatureDim() != imprint.input_dim()) {
    throw ShapeError("imprint expects " + std::to_string(imprint.input_dim()) +
                     " features but the front chain yields " +
                     std::to_string(model.arch.FeatureDim()));
  }
  if (head.classes < 2) throw std::invalid_argument("head needs at least 2 classes");
  model.arch.variant = imprint.variant;
  model.arch.clamp_top = imprint.clamp_top;
  model.arch.imprint_rows = imprint.rows();
  model.arch.bridge = bridge.kind;
  model.arch.bridge_out = bridge.kind == BridgeKind::kSum ? 1 : bridge.out_dim;
  model.arch.classes = head.classes;
  model.arch.logits = head.classes;
  if (model.arch.bridge_out == 0) throw std::invalid_argument("bridge out_dim must be positive");

  model.params.Add(kImprintWeight, imprint.weight.Cast<T>());
  model.params.Add(kImprintBias, imprint.bias.Cast<T>());
  if (bridge.kind == BridgeKind::kIdenticalRow) {
    Tensor<T> scale(Shape{model.arch.bridge_out});
    for (auto& v : scale.data()) v = T(1);
    model.params.Add(kBridgeScale, std::move(scale));
    model.params.Add(kBridgeBias, Tensor<T>(Shape{model.arch.bridge_out}));
  }
  Tensor<T> head_w(Shape{head.classes, model.arch.bridge_out});
  for (std::size_t k = 0; k < head.classes; ++k) {
    for (std::size_t o = 0; o < model.arch.bridge_out; ++o) {
      const double sign = k % 2 == 0 ? 1.0 : -1.0;
      head_w.at(k, o) = static_cast<T>(
          head.init_scale * (head.init == HeadInit::kGaussian ? init.Normal() : sign));
    }
  }
  model.params.Add(kHeadWeight, std::move(head_w));
  model.params.Add(kHeadBias, Tensor<T>(Shape{head.classes}));
  return model;
}

template <typename T>
ModelGraph<T> MakeLogisticModel(std::size_t m, std::size_t classes, const LogisticInit& init,
                                RngStream* stream) {
  if (m == 0 || classes < 2) throw std::invalid_argument("logistic model needs m >= 1, C >= 2");
  ModelGraph<T> model;
  model.arch.kind = ModelKind::kLogistic;
  model.arch.input_dim = m;
  model.arch.classes = classes;
  model.arch.logits = classes + (init.sink_bias.has_value() ? 1 : 0);
  Tensor<T> w(Shape{model.arch.logits, m});
  if (init.weight_scale != 0.0) {
    if (stream == nullptr) throw std::invalid_argument("random logistic init needs a stream");
    for (auto& v : w.data()) v = static_cast<T>(init.weight_scale * stream->Normal());
  }
  Tensor<T> b(Shape{model.arch.logits});
  if (init.sink_bias.has_value()) b[classes] = static_cast<T>(*init.sink_bias);
  model.params.Add(kLinearWeight, std::move(w));
  model.params.Add(kLinearBias, std::move(b));
  return model;
}

template ModelGraph<float> MakeImprintedModel(std::size_t, std::vector<FrontStage>,
                                              const ImprintModule&, const BridgeConfig&,
                                              const HeadConfig&, RngStream&);
template ModelGraph<double> MakeImprintedModel(std::size_t, std::vector<FrontStage>,
                                               const ImprintModule&, const BridgeConfig&,
                                               const HeadConfig&, RngStream&);
template ModelGraph<float> MakeLogisticModel(std::size_t, std::size_t, const LogisticInit&,
                                             RngStream*);
template ModelGraph<double> MakeLogisticModel(std::size_t, std::size_t, const LogisticInit&,
                                              RngStream*);

// ------------------------------------------------------- forward/backward

namespace {

template <typename T>
void ValidateBatch(const ModelGraph<T>& model, const Batch<T>& batch) {
  if (batch.x.rank() != 2 || batch.x.cols() != model.arch.input_dim) {
    throw ShapeError("batch " + ShapeToString(batch.x.shape()) + " does not match input dim " +
                     std::to_string(model.arch.input_dim));
  }
  if (batch.size() == 0) throw ShapeError("empty batch");
  if (batch.labels.size() != batch.size()) {
    throw std::invalid_argument("cross-entropy head needs one label per example");
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.arch.classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(model.arch.classes) + ")");
    }
  }
}

// Softmax of `logits` in place; returns -log p[label] in double.
template <typename T>
double SoftmaxCrossEntropy(std::vector<T>& logits, int label) {
  const T top = *std::max_element(logits.begin(), logits.end());
  T total = 0;
  for (auto& v : logits) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : logits) v /= total;
  return -std::log(static_cast<double>(logits[label]));
}

template <typename T>
T ActivationGrad(ImprintVariant variant, T a, T top) {
  if (variant == ImprintVariant::kRelu) return a > T(0) ? T(1) : T(0);
  return (a > T(0) && a < top) ? T(1) : T(0);
}

template <typename T>
T Activation(ImprintVariant variant, T a, T top) {
  if (a <= T(0)) return T(0);
  if (variant == ImprintVariant::kHardThreshold && a >= top) return top;
  return a;
}

// Shared pass; `grads` may be null for loss-only evaluation.
template <typename T>
double RunImprinted(const ModelGraph<T>& model, const Batch<T>& batch, ParamSet<T>* grads) {
  const auto& arch = model.arch;
  const auto& W = model.params.Get(kImprintWeight);
  const auto& b = model.params.Get(kImprintBias);
  const auto& H = model.params.Get(kHeadWeight);
  const auto& c = model.params.Get(kHeadBias);
  const bool identical_row = arch.bridge == BridgeKind::kIdenticalRow;
  const Tensor<T>* bscale = identical_row ? &model.params.Get(kBridgeScale) : nullptr;
  const Tensor<T>* bbias = identical_row ? &model.params.Get(kBridgeBias) : nullptr;
  const std::size_t rows = W.rows();
  const std::size_t m = W.cols();
  const std::size_t out = arch.bridge_out;
  const std::size_t C = arch.logits;
  const T top = static_cast<T>(arch.clamp_top);
  const T inv_n = T(1) / static_cast<T>(batch.size());

  Tensor<T>* gW = grads ? &grads->Get(kImprintWeight) : nullptr;
  Tensor<T>* gb = grads ? &grads->Get(kImprintBias) : nullptr;
  Tensor<T>* gH = grads ? &grads->Get(kHeadWeight) : nullptr;
  Tensor<T>* gc = grads ? &grads->Get(kHeadBias) : nullptr;
  Tensor<T>* gscale = grads && identical_row ? &grads->Get(kBridgeScale) : nullptr;
  Tensor<T>* gbbias = grads && identical_row ? &grads->Get(kBridgeBias) : nullptr;

  std::vector<T> pre(rows), z(out), logits(C), dz(out);
  double loss = 0.0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const std::vector<T> feat = ApplyFront<T>(arch.front, batch.x.row(t));
    T sum_act = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      pre[i] = Dot<T>(W.row(i), feat) + b[i];
      sum_act += Activation(arch.variant, pre[i], top);
    }
    for (std::size_t o = 0; o < out; ++o) {
      z[o] = identical_row ? (*bscale)[o] * sum_act + (*bbias)[o] : sum_act;
    }
    for (std::size_t k = 0; k < C; ++k) logits[k] = Dot<T>(H.row(k), z) + c[k];
    const int label = batch.labels[t];
    loss += SoftmaxCrossEntropy(logits, label);
    if (grads == nullptr) continue;

    // logits now holds softmax probabilities.
    std::fill(dz.begin(), dz.end(), T(0));
    for (std::size_t k = 0; k < C; ++k) {
      const T dlogit = (logits[k] - (static_cast<int>(k) == label ? T(1) : T(0))) * inv_n;
      (*gc)[k] += dlogit;
      for (std::size_t o = 0; o < out; ++o) {
        gH->at(k, o) += dlogit * z[o];
        dz[o] += H.at(k, o) * dlogit;
      }
    }
    T dsum = 0;
    if (identical_row) {
      for (std::size_t o = 0; o < out; ++o) {
        (*gscale)[o] += dz[o] * sum_act;
        (*gbbias)[o] += dz[o];
        dsum += (*bscale)[o] * dz[o];
      }
    } else {
      dsum = dz[0];
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const T da = dsum * ActivationGrad(arch.variant, pre[i], top);
      if (da == T(0)) continue;
      auto grow = gW->row(i);
      for (std::size_t j = 0; j < m; ++j) grow[j] += da * feat[j];
      (*gb)[i] += da;
    }
  }
  return loss / static_cast<double>(batch.size());
}

template <typename T>
double RunLogistic(const ModelGraph<T>& model, const Batch<T>& batch, ParamSet<T>* grads) {
  const auto& W = model.params.Get(kLinearWeight);
  const auto& b = model.params.Get(kLinearBias);
  const std::size_t C = model.arch.logits;
  const std::size_t m = W.cols();
  const T inv_n = T(1) / static_cast<T>(batch.size());
  Tensor<T>* gW = grads ? &grads->Get(kLinearWeight) : nullptr;
  Tensor<T>* gb = grads ? &grads->Get(kLinearBias) : nullptr;
  std::vector<T> logits(C);
  double loss = 0.0;
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto x = batch.x.row(t);
    for (std::size_t k = 0; k < C; ++k) logits[k] = Dot<T>(W.row(k), x) + b[k];
    const int label = batch.labels[t];
    loss += SoftmaxCrossEntropy(logits, label);
    if (grads == nullptr) continue;
    for (std::size_t k = 0; k < C; ++k) {
      const T dy = (logits[k] - (static_cast<int>(k) == label ? T(1) : T(0))) * inv_n;
      auto grow = gW->row(k);
      for (std::size_t j = 0; j < m; ++j) grow[j] += dy * x[j];
      (*gb)[k] += dy;
    }
  }
  return loss / static_cast<double>(batch.size());
}

}  // namespace

template <typename T>
std::pair<double, UpdatePayload<T>> ForwardBackward(const ModelGraph<T>& model,
                                                    const Batch<T>& batch) {
  ValidateBatch(model, batch);
  UpdatePayload<T> payload;
  payload.kind = PayloadKind::kGradient;
  payload.tensors = model.params.ZerosLike();
  payload.meta.batch_size = batch.size();
  payload.meta.local_steps = 1;
  const double loss = model.arch.kind == ModelKind::kImprinted
                          ? RunImprinted(model, batch, &payload.tensors)
                          : RunLogistic(model, batch, &payload.tensors);
  return {loss, std::move(payload)};
}

template <typename T>
double Loss(const ModelGraph<T>& model, const Batch<T>& batch) {
  ValidateBatch(model, batch);
  return model.arch.kind == ModelKind::kImprinted ? RunImprinted<T>(model, batch, nullptr)
                                                  : RunLogistic<T>(model, batch, nullptr);
}

template <typename T>
Tensor<T> ForwardFeatures(const ModelGraph<T>& model, const Batch<T>& batch) {
  if (batch.x.cols() != model.arch.input_dim) throw ShapeError("batch does not match model");
  const std::size_t m = model.arch.FeatureDim();
  Tensor<T> out(Shape{batch.size(), m});
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto feat = ApplyFront<T>(model.arch.front, batch.x.row(t));
    std::copy(feat.begin(), feat.end(), out.row(t).begin());
  }
  return out;
}

template std::pair<double, UpdatePayload<float>> ForwardBackward(const ModelGraph<float>&,
                                                                 const Batch<float>&);
template std::pair<double, UpdatePayload<double>> ForwardBackward(const ModelGraph<double>&,
                                                                  const Batch<double>&);
template double Loss(const ModelGraph<float>&, const Batch<float>&);
template double Loss(const ModelGraph<double>&, const Batch<double>&);
template Tensor<float> ForwardFeatures(const ModelGraph<float>&, const Batch<float>&);
template Tensor<double> ForwardFeatures(const ModelGraph<double>&, const Batch<double>&);

}  // namespace imprintlab
