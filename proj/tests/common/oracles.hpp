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

// Independent reference implementations used as test oracles. They favour
// the most direct formulation over speed and share no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core/image.hpp"
#include "core/imaging.hpp"
#include "core/rng.hpp"

namespace fodloc::oracle {

/// Bin of v in `bins` right-closed bins over [0, 1]; 0 lands in bin 0.
inline int bin_of(double v, int bins) {
  const int k = static_cast<int>(std::ceil(v * bins)) - 1;
  return std::clamp(k, 0, bins - 1);
}

struct OtsuResult {
  int bin = 0;
  double value = 0.0;
};

/// Exhaustive Otsu: evaluates the exact between-class variance (as a
/// rational, bin-index units) for every split and keeps the lowest maximizer.
/// nullopt when all values share one bin.
inline std::optional<OtsuResult> otsu(const std::vector<float>& values, int bins = 256) {
  std::vector<long long> hist(bins, 0);
  for (float v : values) ++hist[bin_of(v, bins)];
  const long long n = static_cast<long long>(values.size());
  if (std::count_if(hist.begin(), hist.end(), [](long long h) { return h > 0; }) < 2) {
    return std::nullopt;
  }
  // w0 * w1 * (mu0 - mu1)^2 = (n1*s0 - n0*s1)^2 / (n^2 * n0 * n1); the
  // common n^2 is dropped and fractions are compared by cross-multiplying.
  using Int = boost::multiprecision::cpp_int;
  std::optional<OtsuResult> best;
  Int best_num = -1, best_den = 1;
  for (int t = 0; t < bins - 1; ++t) {
    long long n0 = 0, s0 = 0, s1 = 0;
    for (int k = 0; k < bins; ++k) {
      if (k <= t) {
        n0 += hist[k];
        s0 += hist[k] * k;
      } else {
        s1 += hist[k] * k;
      }
    }
    const long long n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;
    const Int diff = Int(n1) * s0 - Int(n0) * s1;
    const Int num = diff * diff;
    const Int den = Int(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best = OtsuResult{t, static_cast<double>(t + 1) / bins};
    }
  }
  return best;
}

/// IoU by counting pixels of rasterized half-open boxes.
inline double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const int x0 = std::min(a.x_min, b.x_min), x1 = std::max(a.x_max, b.x_max);
  const int y0 = std::min(a.y_min, b.y_min), y1 = std::max(a.y_max, b.y_max);
  long long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool ia = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool ib = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Per-pixel (1 - SSIM) / 2 with a border-clipped square window, computed by
/// direct summation over the window.
inline std::vector<double> ssim_dissimilarity(const Image& a, const Image& b, int window) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = a.width(), h = a.height(), half = window / 2;
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double total = 0.0;
      for (int c = 0; c < a.channels(); ++c) {
        std::vector<double> xs, ys;
        for (int v = std::max(0, y - half); v <= std::min(h - 1, y + half); ++v) {
          for (int u = std::max(0, x - half); u <= std::min(w - 1, x + half); ++u) {
            xs.push_back(a.at(u, v, c));
            ys.push_back(b.at(u, v, c));
          }
        }
        const double n = static_cast<double>(xs.size());
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          mx += xs[i];
          my += ys[i];
        }
        mx /= n;
        my /= n;
        double vx = 0, vy = 0, cov = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          vx += (xs[i] - mx) * (xs[i] - mx);
          vy += (ys[i] - my) * (ys[i] - my);
          cov += (xs[i] - mx) * (ys[i] - my);
        }
        vx /= n;
        vy /= n;
        cov /= n;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
      out[static_cast<std::size_t>(y) * w + x] =
          std::clamp((1.0 - total / a.channels()) / 2.0, 0.0, 1.0);
    }
  }
  return out;
}

/// Random difference map drawn from one of several shapes of distribution so
/// that ties, spikes and bin-edge values all occur.
inline DifferenceMap random_difference_map(Rng& rng, int width, int height) {
  DifferenceMap m{width, height, std::vector<float>(static_cast<std::size_t>(width) * height)};
  const int mode = static_cast<int>(rng.uniform_int(0, 4));
  const double a = rng.uniform(0.0, 0.5), b = rng.uniform(0.5, 1.0);
  for (auto& v : m.values) {
    double x = 0.0;
    switch (mode) {
      case 0: x = rng.uniform(); break;
      case 1: x = rng.bernoulli(0.5) ? rng.normal(a, 0.03) : rng.normal(b, 0.05); break;
      case 2: x = static_cast<double>(rng.uniform_int(0, 256)) / 256.0; break;  // bin edges
      case 3: x = rng.bernoulli(0.9) ? std::abs(rng.normal(0.0, 0.02)) : rng.uniform(0.3, 0.9); break;
      default: x = rng.bernoulli(0.5) ? a : b; break;  // two spikes
    }
    v = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return m;
}

inline Image random_image(Rng& rng, int width, int height) {
  Image img(width, height, 3);
  for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace fodloc::oracle
