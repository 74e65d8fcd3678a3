// Copyright 2026 The fodloc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/nn/tensor.hpp"
#include "core/rng.hpp"

namespace fodloc::nn {

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(Shape shape) : value(shape), grad(shape) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// A parameter or state buffer reached while walking a network.
template <typename T>
struct NamedParam {
  std::string name;
  Param<T>* param = nullptr;
  bool trainable = true;
};

// Layers hold their parameters and the activations cached by the most recent
// forward_train() call. forward() is the const inference path and touches no
// member state, so a built network can be shared by concurrent readers.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<T> forward(const Tensor<T>& x) const = 0;
  virtual Tensor<T> forward_train(const Tensor<T>& x) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;

  virtual void collect(const std::string& prefix,
                       std::vector<NamedParam<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual std::string kind() const = 0;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

/// Square-kernel convolution, stride 1, "same" zero padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "conv"; }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  int in_;
  int out_;
  int kernel_;
  bool has_bias_;
  Param<T> weight_;  // [out, in * k * k]
  Param<T> bias_;    // [out]
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "batchnorm"; }

 private:
  int channels_;
  T momentum_;
  T eps_;
  Param<T> gamma_;
  Param<T> beta_;
  Param<T> running_mean_;
  Param<T> running_var_;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor<T> input_;
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "sigmoid"; }

 private:
  Tensor<T> output_;
};

/// Exact (erf-based) GELU.
template <typename T>
class Gelu final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "gelu"; }

 private:
  Tensor<T> input_;
};

/// 2x2 max pooling with stride 2. Spatial sizes must be even.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "maxpool2"; }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// 2x nearest-neighbour upsampling.
template <typename T>
class Upsample2 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "upsample2"; }
};

/// Mean over the spatial plane: (n, c, h, w) -> (n, 1, 1, c).
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  std::string kind() const override { return "gap"; }

 private:
  Shape input_shape_;
};

/// Affine map over the last (w) dimension; every other index is a row.
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int in_features, int out_features, Rng& rng, T init_scale = T(1));

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "linear"; }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_;
  int out_;
  Param<T> weight_;  // [in, out]
  Param<T> bias_;    // [out]
  Tensor<T> input_;
};

/// Normalizes over the last (w) dimension.
template <typename T>
class LayerNorm final : public Layer<T> {
 public:
  explicit LayerNorm(int features, T eps = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "layernorm"; }

 private:
  int features_;
  T eps_;
  Param<T> gamma_;
  Param<T> beta_;
  Tensor<T> normalized_;
  std::vector<T> inv_std_;
};

/// Multi-head self-attention over (n, 1, tokens, dim) sequences.
template <typename T>
class MultiHeadAttention final : public Layer<T> {
 public:
  MultiHeadAttention(int dim, int heads, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "mha"; }

  Linear<T>& qkv() { return qkv_; }
  Linear<T>& proj() { return proj_; }

 private:
  Tensor<T> attend(const Tensor<T>& qkv, AlignedVector<T>* probs) const;

  int dim_;
  int heads_;
  Linear<T> qkv_;
  Linear<T> proj_;
  Tensor<T> qkv_out_;
  AlignedVector<T> probs_;  // [n, heads, L, L]
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;

  Sequential& add(LayerPtr<T> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "sequential"; }

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// y = x + body(x).
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(LayerPtr<T> body) : body_(std::move(body)) {}

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "residual"; }

  Layer<T>& body() { return *body_; }

 private:
  LayerPtr<T> body_;
};

// Element-wise helpers shared by the composite models.
template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src);

/// Concatenates along channels; both inputs share n, h, w.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
void split_channels(const Tensor<T>& g, int first_channels, Tensor<T>& a,
                    Tensor<T>& b);

}  // namespace fodloc::nn
