// Copyright 2026 The pfedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal dense network engine: forward pass, softmax cross-entropy with exact
// backprop, plain SGD. Every model splits into a feature extractor (all layers
// but the last) and a classifier (the last, linear layer).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pfedsim/dataset.hpp"
#include "pfedsim/error.hpp"
#include "pfedsim/matrix.hpp"
#include "pfedsim/rng.hpp"

namespace pfedsim::nn {

enum class Activation { kReLU, kIdentity };

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_width() const { return weights.cols(); }
  std::size_t out_width() const { return weights.rows(); }
  std::size_t param_count() const { return weights.size() + bias.size(); }

  bool operator==(const DenseLayer&) const = default;
};

using Extractor = std::vector<DenseLayer>;
using Classifier = DenseLayer;

class Model {
 public:
  Model() = default;
  explicit Model(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    Validate();
  }

  static Model Compose(Extractor extractor, Classifier classifier) {
    extractor.push_back(std::move(classifier));
    return Model(std::move(extractor));
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Values may change through this; shapes must not.
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  std::size_t extractor_layer_count() const { return layers_.size() - 1; }
  std::span<const DenseLayer> extractor_layers() const {
    return {layers_.data(), extractor_layer_count()};
  }
  Extractor extractor() const {
    return Extractor(layers_.begin(), layers_.end() - 1);
  }
  const Classifier& classifier() const { return layers_.back(); }

  void set_extractor(Extractor extractor) {
    extractor.push_back(layers_.back());
    CheckSameShapes(extractor, "set_extractor");
    layers_ = std::move(extractor);
  }
  void set_classifier(Classifier classifier) {
    const auto& cur = layers_.back();
    if (classifier.weights.rows() != cur.weights.rows() ||
        classifier.weights.cols() != cur.weights.cols() ||
        classifier.bias.size() != cur.bias.size() ||
        classifier.activation != cur.activation) {
      throw StructuralError("set_classifier: classifier shape mismatch");
    }
    layers_.back() = std::move(classifier);
  }

  std::size_t input_width() const { return layers_.front().in_width(); }
  std::size_t num_classes() const { return layers_.back().out_width(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
  }
  std::size_t extractor_param_count() const {
    return param_count() - classifier().param_count();
  }

  bool operator==(const Model&) const = default;

 private:
  void Validate() const {
    if (layers_.empty()) throw StructuralError("Model: needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.bias.size() != l.weights.rows()) {
        throw StructuralError("Model: layer " + std::to_string(k) +
                              " bias length != weight rows");
      }
      if (k > 0 && layers_[k - 1].out_width() != l.in_width()) {
        throw StructuralError("Model: layer " + std::to_string(k) + " expects input width " +
                              std::to_string(l.in_width()) + " but layer " +
                              std::to_string(k - 1) + " outputs " +
                              std::to_string(layers_[k - 1].out_width()));
      }
    }
    if (layers_.back().activation != Activation::kIdentity) {
      throw StructuralError("Model: the classifier layer must be linear");
    }
  }

  void CheckSameShapes(const std::vector<DenseLayer>& other, const char* where) const {
    if (other.size() != layers_.size()) {
      throw StructuralError(std::string(where) + ": layer count mismatch");
    }
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (other[k].weights.rows() != layers_[k].weights.rows() ||
          other[k].weights.cols() != layers_[k].weights.cols() ||
          other[k].bias.size() != layers_[k].bias.size() ||
          other[k].activation != layers_[k].activation) {
        throw StructuralError(std::string(where) + ": layer " + std::to_string(k) +
                              " shape mismatch");
      }
    }
  }

  std::vector<DenseLayer> layers_;
};

// Hidden layers get ReLU, the last layer is linear. Weights are uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases zero.
inline Model InitModel(std::span<const std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw UsageError("InitModel: need at least input and output widths");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k], out = widths[k + 1];
    if (in == 0 || out == 0) throw UsageError("InitModel: zero layer width");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0),
                     k + 2 == widths.size() ? Activation::kIdentity : Activation::kReLU};
    for (auto& w : layer.weights.data()) w = rng.Uniform(-limit, limit);
    layers.push_back(std::move(layer));
  }
  return Model(std::move(layers));
}

struct ForwardResult {
  Matrix logits;
  // activations[k] is the post-activation output of layer k; the last entry
  // equals `logits`, the one before it holds the extracted features.
  std::vector<Matrix> activations;
};

namespace internal {

// out = in * W^T + b, then the activation.
inline Matrix DenseForward(const DenseLayer& layer, const Matrix& in) {
  const std::size_t rows = in.rows(), n_in = layer.in_width(), n_out = layer.out_width();
  Matrix out(rows, n_out);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t o = 0; o < n_out; ++o) {
      const auto w = layer.weights.row(o);
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
      y[o] = (layer.activation == Activation::kReLU && acc < 0.0) ? 0.0 : acc;
    }
  }
  return out;
}

}  // namespace internal

inline ForwardResult Forward(const Model& model, const Matrix& inputs) {
  ForwardResult result;
  result.activations.reserve(model.layers().size());
  const Matrix* current = &inputs;
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    const auto& layer = model.layers()[k];
    if (current->cols() != layer.in_width()) {
      throw StructuralError("Forward: layer " + std::to_string(k) + " expects width " +
                            std::to_string(layer.in_width()) + ", got " +
                            std::to_string(current->cols()));
    }
    if (layer.bias.size() != layer.out_width()) {
      throw StructuralError("Forward: layer " + std::to_string(k) + " bias length mismatch");
    }
    result.activations.push_back(internal::DenseForward(layer, *current));
    current = &result.activations.back();
  }
  result.logits = result.activations.back();
  return result;
}

struct TrainBatch {
  Matrix inputs;
  std::vector<int> labels;
};

struct LayerGradient {
  Matrix weights;
  std::vector<double> bias;
};

using Gradients = std::vector<LayerGradient>;

struct LossAndGradient {
  double loss = 0.0;
  Gradients grads;
};

// Numerically stable log-softmax of one row, written into `out`.
inline void LogSoftmax(std::span<const double> logits, std::span<double> out) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double lse = max + std::log(sum);
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] - lse;
}

namespace internal {

inline void CheckLabels(std::span<const int> labels, std::size_t classes) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw UsageError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }
}

}  // namespace internal

// Mean softmax cross-entropy over the batch and its exact gradient.
inline LossAndGradient LossAndGrad(const Model& model, const Matrix& inputs,
                                   std::span<const int> labels) {
  if (labels.empty() || inputs.rows() == 0) throw UsageError("LossAndGrad: empty batch");
  if (labels.size() != inputs.rows()) {
    throw UsageError("LossAndGrad: label count != input rows");
  }
  const std::size_t classes = model.num_classes();
  internal::CheckLabels(labels, classes);

  const ForwardResult fwd = Forward(model, inputs);
  const std::size_t batch = inputs.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  LossAndGradient result;
  Matrix delta(batch, classes);  // dLoss/dLogits
  std::vector<double> logp(classes);
  for (std::size_t r = 0; r < batch; ++r) {
    LogSoftmax(fwd.logits.row(r), logp);
    const auto y = static_cast<std::size_t>(labels[r]);
    result.loss -= logp[y];
    auto d = delta.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      d[c] = (std::exp(logp[c]) - (c == y ? 1.0 : 0.0)) * inv_batch;
    }
  }
  result.loss *= inv_batch;

  const auto& layers = model.layers();
  result.grads.resize(layers.size());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const Matrix& in = k == 0 ? inputs : fwd.activations[k - 1];
    const std::size_t n_in = layer.in_width(), n_out = layer.out_width();
    LayerGradient& g = result.grads[k];
    g.weights = Matrix(n_out, n_in);
    g.bias.assign(n_out, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      const auto x = in.row(r);
      for (std::size_t o = 0; o < n_out; ++o) {
        if (d[o] == 0.0) continue;
        g.bias[o] += d[o];
        auto gw = g.weights.row(o);
        for (std::size_t i = 0; i < n_in; ++i) gw[i] += d[o] * x[i];
      }
    }
    if (k == 0) break;
    // Propagate through W and the previous layer's ReLU.
    Matrix prev(batch, n_in);
    const auto& prev_act = fwd.activations[k - 1];
    const bool relu = layers[k - 1].activation == Activation::kReLU;
    for (std::size_t r = 0; r < batch; ++r) {
      const auto d = delta.row(r);
      auto p = prev.row(r);
      for (std::size_t o = 0; o < n_out; ++o) {
        if (d[o] == 0.0) continue;
        const auto w = layer.weights.row(o);
        for (std::size_t i = 0; i < n_in; ++i) p[i] += d[o] * w[i];
      }
      if (relu) {
        const auto a = prev_act.row(r);
        for (std::size_t i = 0; i < n_in; ++i) {
          if (a[i] <= 0.0) p[i] = 0.0;
        }
      }
    }
    delta = std::move(prev);
  }
  return result;
}

inline LossAndGradient LossAndGrad(const Model& model, const TrainBatch& batch) {
  return LossAndGrad(model, batch.inputs, batch.labels);
}

// Mean cross-entropy of `model` over a whole dataset.
inline double MeanLoss(const Model& model, const LabeledDataset& data) {
  if (data.empty()) throw UsageError("MeanLoss: empty dataset");
  internal::CheckLabels(data.labels, model.num_classes());
  const ForwardResult fwd = Forward(model, data.features);
  std::vector<double> logp(model.num_classes());
  double loss = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    LogSoftmax(fwd.logits.row(r), logp);
    loss -= logp[static_cast<std::size_t>(data.labels[r])];
  }
  return loss / static_cast<double>(data.size());
}

// In-place p <- p - lr * g.
inline void ApplySgd(Model& model, const Gradients& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("sgd: lr must be finite and >= 0");
  auto& layers = model.mutable_layers();
  if (grads.size() != layers.size()) throw StructuralError("sgd: gradient layer count mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& l = layers[k];
    const auto& g = grads[k];
    if (g.weights.rows() != l.weights.rows() || g.weights.cols() != l.weights.cols() ||
        g.bias.size() != l.bias.size()) {
      throw StructuralError("sgd: gradient shape mismatch at layer " + std::to_string(k));
    }
    auto& w = l.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g.weights.data()[i];
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= lr * g.bias[i];
  }
}

inline Model SgdStep(Model model, const Gradients& grads, double lr) {
  ApplySgd(model, grads, lr);
  return model;
}

// `epochs` passes of mini-batch SGD, reshuffling once per epoch from `rng`.
inline Model LocalTrain(Model model, const LabeledDataset& train, std::size_t epochs,
                        std::size_t batch_size, double lr, Rng& rng) {
  if (batch_size < 1) throw UsageError("LocalTrain: batch_size must be >= 1");
  if (epochs < 1) throw UsageError("LocalTrain: epochs must be >= 1");
  if (train.empty()) throw UsageError("LocalTrain: empty training set");
  const std::size_t n = train.size(), dim = train.dim();
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto order = rng.Permutation(n);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t len = std::min(batch_size, n - start);
      Matrix inputs(len, dim);
      std::vector<int> labels(len);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t src = order[start + i];
        const auto row = train.features.row(src);
        std::copy(row.begin(), row.end(), inputs.row(i).begin());
        labels[i] = train.labels[src];
      }
      const auto step = LossAndGrad(model, inputs, labels);
      ApplySgd(model, step.grads, lr);
    }
  }
  return model;
}

// Weights then bias, layer by layer.
inline std::vector<double> FlattenLayers(std::span<const DenseLayer> layers) {
  std::vector<double> flat;
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weights.data().begin(), l.weights.data().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

inline std::vector<double> Flatten(const Model& model) { return FlattenLayers(model.layers()); }

// Writes `flat` into layers shaped like `layers`.
inline void UnflattenInto(std::span<DenseLayer> layers, std::span<const double> flat) {
  std::size_t expected = 0;
  for (const auto& l : layers) expected += l.param_count();
  if (flat.size() != expected) {
    throw StructuralError("Unflatten: expected " + std::to_string(expected) +
                          " values, got " + std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weights.size(),
                l.weights.data().begin());
    pos += l.weights.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
}

inline Model Unflatten(Model shape, std::span<const double> flat) {
  UnflattenInto(shape.mutable_layers(), flat);
  return shape;
}

// Argmax per row, ties to the lowest class index.
inline std::vector<int> Predict(const Model& model, const Matrix& inputs) {
  const ForwardResult fwd = Forward(model, inputs);
  std::vector<int> out(inputs.rows());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const auto z = fwd.logits.row(r);
    out[r] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

}  // namespace pfedsim::nn
