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

#include "core/nn/layers.hpp"

namespace fodloc::nn {

struct ViTLayerSpec {
  int token_patch = 8;
  int embed_dim = 128;
  int heads = 4;
  int transformer_depth = 2;
  int mlp_ratio = 2;

  friend bool operator==(const ViTLayerSpec&, const ViTLayerSpec&) = default;
};

/// Vision-transformer stage used as a drop-in for a convolution: the feature
/// map is cut into token_patch x token_patch tokens, embedded, given learned
/// position embeddings, passed through pre-norm transformer blocks and
/// projected to out_channels per token. Each token's vector fills its
/// token_patch x token_patch cell of the output map. There is no class token
/// and no classification head.
template <typename T>
class ViTLayer final : public Layer<T> {
 public:
  ViTLayer(const ViTLayerSpec& spec, int in_channels, int out_channels,
           int height, int width, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const override;
  Tensor<T> forward_train(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(const std::string& prefix,
               std::vector<NamedParam<T>>& out) override;
  std::string kind() const override { return "vit"; }

  int tokens() const { return grid_h_ * grid_w_; }
  const ViTLayerSpec& spec() const { return spec_; }
  Param<T>& position() { return position_; }
  Sequential<T>& blocks() { return blocks_; }

  /// (n, c, h, w) -> (n, 1, tokens, c * p * p).
  static Tensor<T> tokenize(const Tensor<T>& x, int patch);
  /// Inverse of tokenize for `channels` output channels.
  static Tensor<T> untokenize(const Tensor<T>& tokens, int channels,
                              int height, int width, int patch);
  /// (n, 1, tokens, c) -> (n, c, h, w), repeating each token over its cell.
  static Tensor<T> broadcast(const Tensor<T>& tokens, int height, int width,
                             int patch);
  /// Adjoint of broadcast: per-cell sums, (n, c, h, w) -> (n, 1, tokens, c).
  static Tensor<T> cell_sum(const Tensor<T>& x, int patch);

 private:
  ViTLayerSpec spec_;
  int in_;
  int out_;
  int height_;
  int width_;
  int grid_h_;
  int grid_w_;
  Linear<T> embed_;
  Param<T> position_;  // [1, 1, tokens, dim]
  Sequential<T> blocks_;
  LayerNorm<T> norm_;
  Linear<T> unembed_;
};

}  // namespace fodloc::nn
