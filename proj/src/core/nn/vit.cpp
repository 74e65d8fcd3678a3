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

#include "core/nn/vit.hpp"

namespace fodloc::nn {
namespace {

void check_spec(const ViTLayerSpec& spec, int height, int width) {
  if (spec.token_patch <= 0 || height % spec.token_patch != 0 ||
      width % spec.token_patch != 0) {
    throw ConfigError("ViT token patch " + std::to_string(spec.token_patch) +
                      " does not divide feature map " + std::to_string(width) +
                      "x" + std::to_string(height));
  }
  if (spec.embed_dim <= 0 || spec.heads <= 0 ||
      spec.embed_dim % spec.heads != 0) {
    throw ConfigError("ViT embed_dim must be divisible by heads");
  }
  if (spec.transformer_depth < 0 || spec.mlp_ratio <= 0) {
    throw ConfigError("ViT depth and mlp ratio must be non-negative");
  }
}

}  // namespace

template <typename T>
ViTLayer<T>::ViTLayer(const ViTLayerSpec& spec, int in_channels,
                      int out_channels, int height, int width, Rng& rng)
    : spec_((check_spec(spec, height, width), spec)),
      in_(in_channels),
      out_(out_channels),
      height_(height),
      width_(width),
      grid_h_(height / spec.token_patch),
      grid_w_(width / spec.token_patch),
      embed_(in_channels * spec.token_patch * spec.token_patch, spec.embed_dim,
             rng),
      position_(Shape{1, 1, grid_h_ * grid_w_, spec.embed_dim}),
      norm_(spec.embed_dim),
      unembed_(spec.embed_dim, out_channels, rng) {
  for (auto& v : position_.value.span()) v = static_cast<T>(rng.normal(0.0, 0.02));
  const int dim = spec.embed_dim;
  for (int b = 0; b < spec.transformer_depth; ++b) {
    auto attn = std::make_unique<Sequential<T>>();
    attn->add(std::make_unique<LayerNorm<T>>(dim));
    attn->add(std::make_unique<MultiHeadAttention<T>>(dim, spec.heads, rng));
    blocks_.add(std::make_unique<Residual<T>>(std::move(attn)));

    auto mlp = std::make_unique<Sequential<T>>();
    mlp->add(std::make_unique<LayerNorm<T>>(dim));
    mlp->add(std::make_unique<Linear<T>>(dim, dim * spec.mlp_ratio, rng));
    mlp->add(std::make_unique<Gelu<T>>());
    mlp->add(std::make_unique<Linear<T>>(dim * spec.mlp_ratio, dim, rng));
    blocks_.add(std::make_unique<Residual<T>>(std::move(mlp)));
  }
}

template <typename T>
Tensor<T> ViTLayer<T>::tokenize(const Tensor<T>& x, int patch) {
  const int gh = x.h() / patch;
  const int gw = x.w() / patch;
  const int feat = x.c() * patch * patch;
  Tensor<T> out(x.n(), 1, gh * gw, feat);
  for (int n = 0; n < x.n(); ++n) {
    for (int gi = 0; gi < gh; ++gi) {
      for (int gj = 0; gj < gw; ++gj) {
        T* dst = &out.at(n, 0, gi * gw + gj, 0);
        for (int c = 0; c < x.c(); ++c) {
          for (int dy = 0; dy < patch; ++dy) {
            const T* src = &x.at(n, c, gi * patch + dy, gj * patch);
            std::copy(src, src + patch, dst + (c * patch + dy) * patch);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> ViTLayer<T>::untokenize(const Tensor<T>& tokens, int channels,
                                  int height, int width, int patch) {
  const int gw = width / patch;
  Tensor<T> out(tokens.n(), channels, height, width);
  for (int n = 0; n < tokens.n(); ++n) {
    for (int t = 0; t < tokens.h(); ++t) {
      const int gi = t / gw;
      const int gj = t % gw;
      const T* src = &tokens.at(n, 0, t, 0);
      for (int c = 0; c < channels; ++c) {
        for (int dy = 0; dy < patch; ++dy) {
          T* dst = &out.at(n, c, gi * patch + dy, gj * patch);
          std::copy(src + (c * patch + dy) * patch,
                    src + (c * patch + dy + 1) * patch, dst);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> ViTLayer<T>::broadcast(const Tensor<T>& tokens, int height, int width,
                                 int patch) {
  const int gw = width / patch;
  const int channels = tokens.w();
  Tensor<T> out(tokens.n(), channels, height, width);
  for (int n = 0; n < tokens.n(); ++n) {
    for (int t = 0; t < tokens.h(); ++t) {
      const int gi = t / gw;
      const int gj = t % gw;
      const T* src = &tokens.at(n, 0, t, 0);
      for (int c = 0; c < channels; ++c) {
        for (int dy = 0; dy < patch; ++dy) {
          T* dst = &out.at(n, c, gi * patch + dy, gj * patch);
          std::fill(dst, dst + patch, src[c]);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> ViTLayer<T>::cell_sum(const Tensor<T>& x, int patch) {
  const int gh = x.h() / patch;
  const int gw = x.w() / patch;
  Tensor<T> out(x.n(), 1, gh * gw, x.c());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < x.h(); ++y) {
        const T* row = &x.at(n, c, y, 0);
        for (int gj = 0; gj < gw; ++gj) {
          T acc = 0;
          for (int dx = 0; dx < patch; ++dx) acc += row[gj * patch + dx];
          out.at(n, 0, (y / patch) * gw + gj, c) += acc;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> ViTLayer<T>::forward(const Tensor<T>& x) const {
  if (x.c() != in_ || x.h() != height_ || x.w() != width_) {
    throw DimensionError("ViT layer built for " + std::to_string(in_) + "x" +
                         std::to_string(height_) + "x" +
                         std::to_string(width_) + ", got " + x.shape().str());
  }
  Tensor<T> z = embed_.forward(tokenize(x, spec_.token_patch));
  for (int n = 0; n < z.n(); ++n) {
    T* row = z.sample(n);
    for (std::size_t i = 0; i < position_.value.size(); ++i) {
      row[i] += position_.value[i];
    }
  }
  z = unembed_.forward(norm_.forward(blocks_.forward(z)));
  return broadcast(z, height_, width_, spec_.token_patch);
}

template <typename T>
Tensor<T> ViTLayer<T>::forward_train(const Tensor<T>& x) {
  if (x.c() != in_ || x.h() != height_ || x.w() != width_) {
    throw DimensionError("ViT layer input mismatch: " + x.shape().str());
  }
  Tensor<T> z = embed_.forward_train(tokenize(x, spec_.token_patch));
  for (int n = 0; n < z.n(); ++n) {
    T* row = z.sample(n);
    for (std::size_t i = 0; i < position_.value.size(); ++i) {
      row[i] += position_.value[i];
    }
  }
  z = unembed_.forward_train(norm_.forward_train(blocks_.forward_train(z)));
  return broadcast(z, height_, width_, spec_.token_patch);
}

template <typename T>
Tensor<T> ViTLayer<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = cell_sum(dy, spec_.token_patch);
  g = blocks_.backward(norm_.backward(unembed_.backward(g)));
  for (int n = 0; n < g.n(); ++n) {
    const T* row = g.sample(n);
    for (std::size_t i = 0; i < position_.grad.size(); ++i) {
      position_.grad[i] += row[i];
    }
  }
  g = embed_.backward(g);
  return untokenize(g, in_, height_, width_, spec_.token_patch);
}

template <typename T>
void ViTLayer<T>::collect(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  embed_.collect(p + "embed", out);
  out.push_back({p + "position", &position_, true});
  blocks_.collect(p + "blocks", out);
  norm_.collect(p + "norm", out);
  unembed_.collect(p + "unembed", out);
}

template class ViTLayer<float>;
template class ViTLayer<double>;

}  // namespace fodloc::nn
