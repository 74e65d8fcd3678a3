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

#include "core/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>

namespace fodloc::nn {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

// Rows are (channel, ky, kx), columns are output pixels.
template <typename T>
void im2col(const T* in, int channels, int h, int w, int k, T* cols) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    const T* src = in + c * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h || x_lo >= x_hi) {
            std::fill(row, row + w, T(0));
            continue;
          }
          std::fill(row, row + x_lo, T(0));
          const T* srow = src + static_cast<std::size_t>(sy) * w;
          std::copy(srow + x_lo + dx, srow + x_hi + dx, row + x_lo);
          std::fill(row + x_hi, row + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, T* out) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    T* dst = out + c * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src =
            cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        const int dx = kx - pad;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* drow = dst + static_cast<std::size_t>(sy) * w;
          for (int x = x_lo; x < x_hi; ++x) drow[x + dx] += row[x];
        }
      }
    }
  }
}

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double stddev) {
  for (auto& v : t.span()) v = static_cast<T>(rng.normal(0.0, stddev));
}

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, bool bias,
                  Rng& rng)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      has_bias_(bias),
      weight_(Shape{1, 1, out_channels, in_channels * kernel * kernel}),
      bias_(Shape{1, 1, 1, bias ? out_channels : 0}) {
  if (kernel % 2 == 0 || kernel < 1) {
    throw ConfigError("convolution kernel must be odd");
  }
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  fill_normal(weight_.value, rng, std::sqrt(2.0 / fan_in));
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  if (x.c() != in_) {
    throw DimensionError("conv expects " + std::to_string(in_) +
                         " channels, got " + std::to_string(x.c()));
  }
  const int h = x.h();
  const int w = x.w();
  const int kk = in_ * kernel_ * kernel_;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> y(x.n(), out_, h, w);
  AlignedVector<T> cols(kernel_ == 1 ? 0 : kk * plane);
  CMapR<T> wm(weight_.value.data(), out_, kk);
  for (int n = 0; n < x.n(); ++n) {
    const T* src = x.sample(n);
    if (kernel_ != 1) {
      im2col(src, in_, h, w, kernel_, cols.data());
      src = cols.data();
    }
    MapR<T> ym(y.sample(n), out_, static_cast<Eigen::Index>(plane));
    ym.noalias() = wm * CMapR<T>(src, kk, static_cast<Eigen::Index>(plane));
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::forward_train(const Tensor<T>& x) {
  input_ = x;
  return forward(x);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  const Tensor<T>& x = input_;
  const int h = x.h();
  const int w = x.w();
  const int kk = in_ * kernel_ * kernel_;
  const auto plane = static_cast<Eigen::Index>(static_cast<std::size_t>(h) * w);
  Tensor<T> dx(x.shape());
  AlignedVector<T> cols(kernel_ == 1 ? 0 : kk * plane);
  AlignedVector<T> dcols(kernel_ == 1 ? 0 : kk * plane);
  CMapR<T> wm(weight_.value.data(), out_, kk);
  MapR<T> dwm(weight_.grad.data(), out_, kk);
  for (int n = 0; n < x.n(); ++n) {
    const T* src = x.sample(n);
    if (kernel_ != 1) {
      im2col(src, in_, h, w, kernel_, cols.data());
      src = cols.data();
    }
    CMapR<T> dym(dy.sample(n), out_, plane);
    dwm.noalias() += dym * CMapR<T>(src, kk, plane).transpose();
    if (has_bias_) {
      for (int o = 0; o < out_; ++o) bias_.grad[o] += dym.row(o).sum();
    }
    if (kernel_ == 1) {
      MapR<T>(dx.sample(n), kk, plane).noalias() = wm.transpose() * dym;
    } else {
      MapR<T>(dcols.data(), kk, plane).noalias() = wm.transpose() * dym;
      col2im_add(dcols.data(), in_, h, w, kernel_, dx.sample(n));
    }
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix,
                        std::vector<NamedParam<T>>& out) {
  out.push_back({join(prefix, "weight"), &weight_, true});
  if (has_bias_) out.push_back({join(prefix, "bias"), &bias_, true});
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels, T momentum, T eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(Shape{1, 1, 1, channels}),
      beta_(Shape{1, 1, 1, channels}),
      running_mean_(Shape{1, 1, 1, channels}),
      running_var_(Shape{1, 1, 1, channels}) {
  gamma_.value.fill(T(1));
  running_var_.value.fill(T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  const std::size_t plane = x.shape().plane();
  for (int c = 0; c < channels_; ++c) {
    const T scale =
        gamma_.value[c] / std::sqrt(running_var_.value[c] + eps_);
    const T shift = beta_.value[c] - running_mean_.value[c] * scale;
    for (int n = 0; n < x.n(); ++n) {
      const T* src = x.sample(n) + c * plane;
      T* dst = y.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward_train(const Tensor<T>& x) {
  if (x.c() != channels_) throw DimensionError("batchnorm channel mismatch");
  const std::size_t plane = x.shape().plane();
  const double count = static_cast<double>(plane) * x.n();
  normalized_ = Tensor<T>(x.shape());
  inv_std_.assign(channels_, T(0));
  Tensor<T> y(x.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (int n = 0; n < x.n(); ++n) {
      const T* src = x.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += src[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < x.n(); ++n) {
      const T* src = x.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / count;
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv_std;
    for (int n = 0; n < x.n(); ++n) {
      const T* src = x.sample(n) + c * plane;
      T* xh = normalized_.sample(n) + c * plane;
      T* dst = y.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = static_cast<T>((src[i] - mean) * inv_std);
        dst[i] = gamma_.value[c] * xh[i] + beta_.value[c];
      }
    }
    const double unbiased = count > 1 ? var * count / (count - 1) : var;
    running_mean_.value[c] = static_cast<T>(
        (1 - momentum_) * running_mean_.value[c] + momentum_ * mean);
    running_var_.value[c] = static_cast<T>(
        (1 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy) {
  const std::size_t plane = dy.shape().plane();
  const double count = static_cast<double>(plane) * dy.n();
  Tensor<T> dx(dy.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (int n = 0; n < dy.n(); ++n) {
      const T* g = dy.sample(n) + c * plane;
      const T* xh = normalized_.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xh += static_cast<double>(g[i]) * xh[i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xh);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double k = gamma_.value[c] * inv_std_[c] / count;
    for (int n = 0; n < dy.n(); ++n) {
      const T* g = dy.sample(n) + c * plane;
      const T* xh = normalized_.sample(n) + c * plane;
      T* d = dx.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        d[i] = static_cast<T>(k * (count * g[i] - sum_dy - xh[i] * sum_dy_xh));
      }
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix,
                             std::vector<NamedParam<T>>& out) {
  out.push_back({join(prefix, "gamma"), &gamma_, true});
  out.push_back({join(prefix, "beta"), &beta_, true});
  out.push_back({join(prefix, "running_mean"), &running_mean_, false});
  out.push_back({join(prefix, "running_var"), &running_var_, false});
}

// ------------------------------------------------------------ activations

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.span()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::forward_train(const Tensor<T>& x) {
  input_ = x;
  return forward(x);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_[i] > T(0))) dx[i] = T(0);
  }
  return dx;
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.span()) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                  : std::exp(v) / (T(1) + std::exp(v));
  }
  return y;
}

template <typename T>
Tensor<T> Sigmoid<T>::forward_train(const Tensor<T>& x) {
  output_ = forward(x);
  return output_;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const T s = output_[i];
    dx[i] *= s * (T(1) - s);
  }
  return dx;
}

template <typename T>
Tensor<T> Gelu<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.span()) {
    v = T(0.5) * v * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2)));
  }
  return y;
}

template <typename T>
Tensor<T> Gelu<T>::forward_train(const Tensor<T>& x) {
  input_ = x;
  return forward(x);
}

template <typename T>
Tensor<T> Gelu<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  const T inv_sqrt_2pi = T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const T v = input_[i];
    const T cdf = T(0.5) * (T(1) + std::erf(v * T(std::numbers::sqrt2 / 2)));
    const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
    dx[i] *= cdf + v * pdf;
  }
  return dx;
}

// ------------------------------------------------------------ resampling

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) const {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw DimensionError("maxpool2 needs even spatial size, got " +
                         x.shape().str());
  }
  Tensor<T> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int i = 0; i < y.h(); ++i) {
        for (int j = 0; j < y.w(); ++j) {
          T best = x.at(n, c, 2 * i, 2 * j);
          best = std::max(best, x.at(n, c, 2 * i, 2 * j + 1));
          best = std::max(best, x.at(n, c, 2 * i + 1, 2 * j));
          best = std::max(best, x.at(n, c, 2 * i + 1, 2 * j + 1));
          y.at(n, c, i, j) = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward_train(const Tensor<T>& x) {
  Tensor<T> y = forward(x);
  input_shape_ = x.shape();
  argmax_.resize(y.size());
  std::size_t k = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int i = 0; i < y.h(); ++i) {
        for (int j = 0; j < y.w(); ++j, ++k) {
          std::size_t best = x.offset(n, c, 2 * i, 2 * j);
          for (int di = 0; di < 2; ++di) {
            for (int dj = 0; dj < 2; ++dj) {
              const std::size_t o = x.offset(n, c, 2 * i + di, 2 * j + dj);
              if (x[o] > x[best]) best = o;
            }
          }
          argmax_[k] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(input_shape_);
  for (std::size_t k = 0; k < dy.size(); ++k) dx[argmax_[k]] += dy[k];
  return dx;
}

template <typename T>
Tensor<T> Upsample2<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int i = 0; i < y.h(); ++i) {
        const T* src = &x.at(n, c, i / 2, 0);
        T* dst = &y.at(n, c, i, 0);
        for (int j = 0; j < y.w(); ++j) dst[j] = src[j / 2];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> Upsample2<T>::forward_train(const Tensor<T>& x) {
  return forward(x);
}

template <typename T>
Tensor<T> Upsample2<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.n(), dy.c(), dy.h() / 2, dy.w() / 2);
  for (int n = 0; n < dy.n(); ++n) {
    for (int c = 0; c < dy.c(); ++c) {
      for (int i = 0; i < dy.h(); ++i) {
        const T* src = &dy.at(n, c, i, 0);
        T* dst = &dx.at(n, c, i / 2, 0);
        for (int j = 0; j < dy.w(); ++j) dst[j / 2] += src[j];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y(x.n(), 1, 1, x.c());
  const std::size_t plane = x.shape().plane();
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const T* src = x.sample(n) + c * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += src[i];
      y.at(n, 0, 0, c) = static_cast<T>(s / static_cast<double>(plane));
    }
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward_train(const Tensor<T>& x) {
  input_shape_ = x.shape();
  return forward(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(input_shape_);
  const std::size_t plane = input_shape_.plane();
  const T scale = T(1) / static_cast<T>(plane);
  for (int n = 0; n < dx.n(); ++n) {
    for (int c = 0; c < dx.c(); ++c) {
      T* dst = dx.sample(n) + c * plane;
      std::fill(dst, dst + plane, dy.at(n, 0, 0, c) * scale);
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(int in_features, int out_features, Rng& rng, T init_scale)
    : in_(in_features),
      out_(out_features),
      weight_(Shape{1, 1, in_features, out_features}),
      bias_(Shape{1, 1, 1, out_features}) {
  fill_normal(weight_.value, rng,
              init_scale * std::sqrt(2.0 / (in_features + out_features)));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  if (x.w() != in_) {
    throw DimensionError("linear expects " + std::to_string(in_) +
                         " features, got " + std::to_string(x.w()));
  }
  const auto rows = static_cast<Eigen::Index>(x.size() / in_);
  Tensor<T> y(x.n(), x.c(), x.h(), out_);
  MapR<T> ym(y.data(), rows, out_);
  ym.noalias() = CMapR<T>(x.data(), rows, in_) *
                 CMapR<T>(weight_.value.data(), in_, out_);
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(
      bias_.value.data(), out_);
  return y;
}

template <typename T>
Tensor<T> Linear<T>::forward_train(const Tensor<T>& x) {
  input_ = x;
  return forward(x);
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy) {
  const auto rows = static_cast<Eigen::Index>(input_.size() / in_);
  CMapR<T> xm(input_.data(), rows, in_);
  CMapR<T> dym(dy.data(), rows, out_);
  MapR<T>(weight_.grad.data(), in_, out_).noalias() += xm.transpose() * dym;
  MapR<T>(bias_.grad.data(), 1, out_) += dym.colwise().sum();
  Tensor<T> dx(input_.shape());
  MapR<T>(dx.data(), rows, in_).noalias() =
      dym * CMapR<T>(weight_.value.data(), in_, out_).transpose();
  return dx;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix,
                        std::vector<NamedParam<T>>& out) {
  out.push_back({join(prefix, "weight"), &weight_, true});
  out.push_back({join(prefix, "bias"), &bias_, true});
}

// ------------------------------------------------------------- LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(int features, T eps)
    : features_(features),
      eps_(eps),
      gamma_(Shape{1, 1, 1, features}),
      beta_(Shape{1, 1, 1, features}) {
  gamma_.value.fill(T(1));
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y(x.shape());
  const std::size_t rows = x.size() / features_;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x.data() + r * features_;
    T* dst = y.data() + r * features_;
    double mean = 0.0;
    for (int i = 0; i < features_; ++i) mean += src[i];
    mean /= features_;
    double var = 0.0;
    for (int i = 0; i < features_; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= features_;
    const double inv = 1.0 / std::sqrt(var + eps_);
    for (int i = 0; i < features_; ++i) {
      dst[i] = static_cast<T>((src[i] - mean) * inv) * gamma_.value[i] +
               beta_.value[i];
    }
  }
  return y;
}

template <typename T>
Tensor<T> LayerNorm<T>::forward_train(const Tensor<T>& x) {
  if (x.w() != features_) throw DimensionError("layernorm feature mismatch");
  const std::size_t rows = x.size() / features_;
  normalized_ = Tensor<T>(x.shape());
  inv_std_.assign(rows, T(0));
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x.data() + r * features_;
    T* xh = normalized_.data() + r * features_;
    T* dst = y.data() + r * features_;
    double mean = 0.0;
    for (int i = 0; i < features_; ++i) mean += src[i];
    mean /= features_;
    double var = 0.0;
    for (int i = 0; i < features_; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= features_;
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[r] = static_cast<T>(inv);
    for (int i = 0; i < features_; ++i) {
      xh[i] = static_cast<T>((src[i] - mean) * inv);
      dst[i] = xh[i] * gamma_.value[i] + beta_.value[i];
    }
  }
  return y;
}

template <typename T>
Tensor<T> LayerNorm<T>::backward(const Tensor<T>& dy) {
  const std::size_t rows = dy.size() / features_;
  Tensor<T> dx(dy.shape());
  std::vector<double> dxh(features_);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* g = dy.data() + r * features_;
    const T* xh = normalized_.data() + r * features_;
    T* d = dx.data() + r * features_;
    double sum = 0.0;
    double sum_xh = 0.0;
    for (int i = 0; i < features_; ++i) {
      gamma_.grad[i] += g[i] * xh[i];
      beta_.grad[i] += g[i];
      dxh[i] = static_cast<double>(g[i]) * gamma_.value[i];
      sum += dxh[i];
      sum_xh += dxh[i] * xh[i];
    }
    const double k = static_cast<double>(inv_std_[r]) / features_;
    for (int i = 0; i < features_; ++i) {
      d[i] = static_cast<T>(k * (features_ * dxh[i] - sum - xh[i] * sum_xh));
    }
  }
  return dx;
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix,
                           std::vector<NamedParam<T>>& out) {
  out.push_back({join(prefix, "gamma"), &gamma_, true});
  out.push_back({join(prefix, "beta"), &beta_, true});
}

// ---------------------------------------------------- MultiHeadAttention

template <typename T>
MultiHeadAttention<T>::MultiHeadAttention(int dim, int heads, Rng& rng)
    : dim_(dim), heads_(heads), qkv_(dim, 3 * dim, rng), proj_(dim, dim, rng) {
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("embedding dim " + std::to_string(dim) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::attend(const Tensor<T>& qkv,
                                        AlignedVector<T>* probs) const {
  const int n = qkv.n();
  const int len = qkv.h();
  const int hd = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Tensor<T> out(n, 1, len, dim_);
  if (probs) probs->assign(static_cast<std::size_t>(n) * heads_ * len * len, T(0));
  MatR<T> scores(len, len);
  for (int s = 0; s < n; ++s) {
    CMapR<T> all(qkv.sample(s), len, 3 * dim_);
    MapR<T> o(out.sample(s), len, dim_);
    for (int h = 0; h < heads_; ++h) {
      auto q = all.block(0, h * hd, len, hd);
      auto k = all.block(0, dim_ + h * hd, len, hd);
      auto v = all.block(0, 2 * dim_ + h * hd, len, hd);
      scores.noalias() = (q * k.transpose()) * scale;
      for (int i = 0; i < len; ++i) {
        auto row = scores.row(i);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      o.block(0, h * hd, len, hd).noalias() = scores * v;
      if (probs) {
        MapR<T>(probs->data() +
                    (static_cast<std::size_t>(s) * heads_ + h) * len * len,
                len, len) = scores;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward(const Tensor<T>& x) const {
  return proj_.forward(attend(qkv_.forward(x), nullptr));
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::forward_train(const Tensor<T>& x) {
  qkv_out_ = qkv_.forward_train(x);
  return proj_.forward_train(attend(qkv_out_, &probs_));
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::backward(const Tensor<T>& dy) {
  const Tensor<T> d_attn = proj_.backward(dy);
  const int n = qkv_out_.n();
  const int len = qkv_out_.h();
  const int hd = dim_ / heads_;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  Tensor<T> dqkv(qkv_out_.shape());
  MatR<T> dp(len, len);
  for (int s = 0; s < n; ++s) {
    CMapR<T> all(qkv_out_.sample(s), len, 3 * dim_);
    CMapR<T> dout(d_attn.sample(s), len, dim_);
    MapR<T> dall(dqkv.sample(s), len, 3 * dim_);
    for (int h = 0; h < heads_; ++h) {
      CMapR<T> p(probs_.data() +
                     (static_cast<std::size_t>(s) * heads_ + h) * len * len,
                 len, len);
      auto q = all.block(0, h * hd, len, hd);
      auto k = all.block(0, dim_ + h * hd, len, hd);
      auto v = all.block(0, 2 * dim_ + h * hd, len, hd);
      auto dout_h = dout.block(0, h * hd, len, hd);
      dall.block(0, 2 * dim_ + h * hd, len, hd).noalias() =
          p.transpose() * dout_h;
      dp.noalias() = dout_h * v.transpose();
      // Softmax Jacobian applied row-wise.
      for (int i = 0; i < len; ++i) {
        const T dot = dp.row(i).dot(p.row(i));
        dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)) * scale;
      }
      dall.block(0, h * hd, len, hd).noalias() = dp * k;
      dall.block(0, dim_ + h * hd, len, hd).noalias() = dp.transpose() * q;
    }
  }
  return qkv_.backward(dqkv);
}

template <typename T>
void MultiHeadAttention<T>::collect(const std::string& prefix,
                                    std::vector<NamedParam<T>>& out) {
  qkv_.collect(join(prefix, "qkv"), out);
  proj_.collect(join(prefix, "proj"), out);
}

// ---------------------------------------------------- Sequential/Residual

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (const auto& layer : layers_) y = layer->forward(y);
  return y;
}

template <typename T>
Tensor<T> Sequential<T>::forward_train(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& layer : layers_) y = layer->forward_train(y);
  return y;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy) {
  Tensor<T> g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
  return g;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix,
                            std::vector<NamedParam<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect(
        join(prefix, std::to_string(i) + "_" + layers_[i]->kind()), out);
  }
}

template <typename T>
Tensor<T> Residual<T>::forward(const Tensor<T>& x) const {
  Tensor<T> y = body_->forward(x);
  add_inplace(y, x);
  return y;
}

template <typename T>
Tensor<T> Residual<T>::forward_train(const Tensor<T>& x) {
  Tensor<T> y = body_->forward_train(x);
  add_inplace(y, x);
  return y;
}

template <typename T>
Tensor<T> Residual<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx = body_->backward(dy);
  add_inplace(dx, dy);
  return dx;
}

template <typename T>
void Residual<T>::collect(const std::string& prefix,
                          std::vector<NamedParam<T>>& out) {
  body_->collect(prefix, out);
}

// --------------------------------------------------------------- helpers

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
  require_same_shape(dst, src, "add");
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw DimensionError("concat: " + a.shape().str() + " vs " +
                         b.shape().str());
  }
  Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(),
              out.sample(n) + a.sample_size());
  }
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& g, int first_channels, Tensor<T>& a,
                    Tensor<T>& b) {
  a = Tensor<T>(g.n(), first_channels, g.h(), g.w());
  b = Tensor<T>(g.n(), g.c() - first_channels, g.h(), g.w());
  for (int n = 0; n < g.n(); ++n) {
    std::copy(g.sample(n), g.sample(n) + a.sample_size(), a.sample(n));
    std::copy(g.sample(n) + a.sample_size(), g.sample(n) + g.sample_size(),
              b.sample(n));
  }
}

#define FODLOC_INSTANTIATE(T)                                              \
  template class Conv2d<T>;                                                \
  template class BatchNorm2d<T>;                                           \
  template class ReLU<T>;                                                  \
  template class Sigmoid<T>;                                               \
  template class Gelu<T>;                                                  \
  template class MaxPool2<T>;                                              \
  template class Upsample2<T>;                                             \
  template class GlobalAvgPool<T>;                                         \
  template class Linear<T>;                                                \
  template class LayerNorm<T>;                                             \
  template class MultiHeadAttention<T>;                                    \
  template class Sequential<T>;                                            \
  template class Residual<T>;                                              \
  template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&); \
  template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&,       \
                                  Tensor<T>&);

FODLOC_INSTANTIATE(float)
FODLOC_INSTANTIATE(double)

#undef FODLOC_INSTANTIATE

}  // namespace fodloc::nn
