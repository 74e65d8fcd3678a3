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

#include "core/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fodloc {
namespace {

void require_same_size(const Image& a, const Image& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height() ||
      a.channels() != b.channels()) {
    throw DimensionError(std::string(op) + ": image sizes differ (" +
                         std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + "x" +
                         std::to_string(a.channels()) + " vs " +
                         std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + "x" +
                         std::to_string(b.channels()) + ")");
  }
}

// Summed-area table with a zero top row and left column.
class Integral {
 public:
  Integral(int w, int h) : w_(w), h_(h), sums_((w + 1) * (h + 1), 0.0) {}

  double& cell(int x, int y) { return sums_[y * (w_ + 1) + x]; }
  double cell(int x, int y) const { return sums_[y * (w_ + 1) + x]; }

  template <typename F>
  void build(F value) {
    for (int y = 0; y < h_; ++y) {
      double row = 0.0;
      for (int x = 0; x < w_; ++x) {
        row += value(x, y);
        cell(x + 1, y + 1) = cell(x + 1, y) + row;
      }
    }
  }

  double box(int x0, int y0, int x1, int y1) const {
    return cell(x1, y1) - cell(x0, y1) - cell(x1, y0) + cell(x0, y0);
  }

 private:
  int w_;
  int h_;
  std::vector<double> sums_;
};

using u128 = unsigned __int128;
using i128 = __int128;

}  // namespace

double DifferenceMap::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double DifferenceMap::mean_in(const BoundingBox& box) const {
  if (!box.valid()) return 0.0;
  double sum = 0.0;
  for (int y = box.y_min; y < box.y_max; ++y) {
    for (int x = box.x_min; x < box.x_max; ++x) sum += at(x, y);
  }
  return sum / static_cast<double>(box.area());
}

std::size_t SegmentationMap::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

int histogram_bin(double v, int bins) {
  const double scaled = std::ceil(v * bins) - 1.0;
  return static_cast<int>(std::clamp(scaled, 0.0, bins - 1.0));
}

DifferenceMap difference_map(const Image& original,
                             const Image& reconstruction) {
  require_same_size(original, reconstruction, "difference_map");
  DifferenceMap d{original.width(), original.height(), {}};
  d.values.resize(static_cast<std::size_t>(d.width) * d.height);
  const int channels = original.channels();
  const auto& a = original.pixels();
  const auto& b = reconstruction.pixels();
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    float sum = 0.0f;
    for (int c = 0; c < channels; ++c) {
      sum += std::fabs(b[i * channels + c] - a[i * channels + c]);
    }
    d.values[i] = sum / static_cast<float>(channels);
  }
  return d;
}

DifferenceMap ssim_map(const Image& original, const Image& reconstruction,
                       int window) {
  require_same_size(original, reconstruction, "ssim_map");
  if (window < 3 || window % 2 == 0) {
    throw InvalidArgument("SSIM window must be odd and >= 3");
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const int w = original.width();
  const int h = original.height();
  const int half = window / 2;
  DifferenceMap d{w, h, std::vector<float>(static_cast<std::size_t>(w) * h)};
  std::vector<double> acc(d.values.size(), 0.0);
  for (int c = 0; c < original.channels(); ++c) {
    Integral sx(w, h), sy(w, h), sxx(w, h), syy(w, h), sxy(w, h);
    auto px = [&](int x, int y) { return double(original.at(x, y, c)); };
    auto py = [&](int x, int y) { return double(reconstruction.at(x, y, c)); };
    sx.build(px);
    sy.build(py);
    sxx.build([&](int x, int y) { return px(x, y) * px(x, y); });
    syy.build([&](int x, int y) { return py(x, y) * py(x, y); });
    sxy.build([&](int x, int y) { return px(x, y) * py(x, y); });
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - half);
      const int y1 = std::min(h, y + half + 1);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - half);
        const int x1 = std::min(w, x + half + 1);
        const double n = double(x1 - x0) * (y1 - y0);
        const double mx = sx.box(x0, y0, x1, y1) / n;
        const double my = sy.box(x0, y0, x1, y1) / n;
        const double vx = sxx.box(x0, y0, x1, y1) / n - mx * mx;
        const double vy = syy.box(x0, y0, x1, y1) / n - my * my;
        const double cxy = sxy.box(x0, y0, x1, y1) / n - mx * my;
        const double ssim = ((2 * mx * my + kC1) * (2 * cxy + kC2)) /
                            ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        acc[static_cast<std::size_t>(y) * w + x] += ssim;
      }
    }
  }
  const double channels = original.channels();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    d.values[i] = static_cast<float>(
        std::clamp((1.0 - acc[i] / channels) / 2.0, 0.0, 1.0));
  }
  return d;
}

std::optional<OtsuThreshold> otsu_threshold(const DifferenceMap& map,
                                            int bins) {
  if (map.values.empty()) throw InvalidArgument("otsu_threshold: empty map");
  if (bins < 2) throw InvalidArgument("otsu_threshold: need at least 2 bins");
  std::vector<std::int64_t> hist(bins, 0);
  for (float v : map.values) ++hist[histogram_bin(v, bins)];

  // Work in bin-index units with exact integer sums.
  const auto total = static_cast<std::int64_t>(map.values.size());
  i128 sum = 0;
  i128 sum_sq = 0;
  for (int k = 0; k < bins; ++k) {
    sum += static_cast<i128>(hist[k]) * k;
    sum_sq += static_cast<i128>(hist[k]) * k * k;
  }
  const i128 var_num = static_cast<i128>(total) * sum_sq - sum * sum;
  const long double variance = static_cast<long double>(var_num) /
                               (static_cast<long double>(total) * total) /
                               (static_cast<long double>(bins) * bins);
  if (variance < 1e-12L) return std::nullopt;

  // Between-class variance up to the constant 1/N^2:
  //   (S0 * n1 - S1 * n0)^2 / (n0 * n1).
  // |S0 * n1 - S1 * n0| <= 255 * n0 * n1, so the cross products fit 128 bits
  // for maps up to 2^18 pixels (448x448 included); larger maps fall back to
  // long double comparison.
  const bool exact = bins <= 256 && total <= (std::int64_t{1} << 18);
  std::int64_t n0 = 0;
  i128 s0 = 0;
  int best = -1;
  u128 best_num = 0;
  u128 best_den = 1;
  long double best_score = -1.0L;
  for (int k = 0; k < bins - 1; ++k) {
    n0 += hist[k];
    s0 += static_cast<i128>(hist[k]) * k;
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const i128 s1 = sum - s0;
    const i128 diff = s0 * n1 - s1 * n0;
    const u128 num = static_cast<u128>(diff < 0 ? -diff : diff);
    const u128 den = static_cast<u128>(n0) * static_cast<u128>(n1);
    if (exact) {
      const u128 num_sq = num * num;
      if (best < 0 || num_sq * best_den > best_num * den) {
        best = k;
        best_num = num_sq;
        best_den = den;
      }
    } else {
      const long double score =
          static_cast<long double>(num) * static_cast<long double>(num) /
          static_cast<long double>(den);
      if (best < 0 || score > best_score) {
        best = k;
        best_score = score;
      }
    }
  }
  if (best < 0) return std::nullopt;
  return OtsuThreshold{static_cast<double>(best + 1) / bins, best};
}

SegmentationMap threshold_map(const DifferenceMap& map, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument("threshold must lie in [0, 1]");
  }
  SegmentationMap seg{map.width, map.height,
                      std::vector<std::uint8_t>(map.values.size(), 0), t};
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    seg.mask[i] = static_cast<double>(map.values[i]) > t ? 1 : 0;
  }
  return seg;
}

std::optional<BoundingBox> extreme_points(const SegmentationMap& seg) {
  int left = seg.width;
  int right = -1;
  int top = seg.height;
  int bottom = -1;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      if (!seg.at(x, y)) continue;
      left = std::min(left, x);
      right = std::max(right, x);
      top = std::min(top, y);
      bottom = std::max(bottom, y);
    }
  }
  if (right < 0) return std::nullopt;
  return BoundingBox{left, top, right + 1, bottom + 1};
}

SegmentationMap min_area_filter(const SegmentationMap& seg,
                                std::size_t min_pixels) {
  SegmentationMap out = seg;
  if (seg.count() < min_pixels) {
    std::fill(out.mask.begin(), out.mask.end(), 0);
  }
  return out;
}

CroppedLocalization crop(const Image& patch, const BoundingBox& box) {
  if (!box.inside(patch.width(), patch.height())) {
    throw BoundsError("crop box (" + std::to_string(box.x_min) + "," +
                      std::to_string(box.y_min) + "," +
                      std::to_string(box.x_max) + "," +
                      std::to_string(box.y_max) + ") outside " +
                      std::to_string(patch.width()) + "x" +
                      std::to_string(patch.height()));
  }
  Image out(box.width(), box.height(), patch.channels());
  for (int y = 0; y < box.height(); ++y) {
    for (int x = 0; x < box.width(); ++x) {
      for (int c = 0; c < patch.channels(); ++c) {
        out.at(x, y, c) = patch.at(box.x_min + x, box.y_min + y, c);
      }
    }
  }
  return {std::move(out), box};
}

void paste(Image& dst, const CroppedLocalization& crop) {
  if (!crop.box.inside(dst.width(), dst.height())) {
    throw BoundsError("paste box outside destination");
  }
  for (int y = 0; y < crop.image.height(); ++y) {
    for (int x = 0; x < crop.image.width(); ++x) {
      for (int c = 0; c < dst.channels(); ++c) {
        dst.at(crop.box.x_min + x, crop.box.y_min + y, c) =
            crop.image.at(x, y, c);
      }
    }
  }
}

SegmentationMap stitch_segmentation(
    const std::vector<std::vector<SegmentationMap>>& grid,
    const PatchSpec& spec) {
  if (grid.empty() || grid.front().empty()) {
    throw CompletenessError("stitch: empty grid");
  }
  const int rows = static_cast<int>(grid.size());
  const int cols = static_cast<int>(grid.front().size());
  SegmentationMap out{cols * spec.width, rows * spec.height, {}, std::nullopt};
  out.mask.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(grid[r].size()) != cols) {
      throw CompletenessError("stitch: row " + std::to_string(r) + " has " +
                              std::to_string(grid[r].size()) + " cells, expected " +
                              std::to_string(cols));
    }
    for (int c = 0; c < cols; ++c) {
      const SegmentationMap& cell = grid[r][c];
      if (cell.mask.empty()) {
        throw CompletenessError("stitch: missing cell (" + std::to_string(r) +
                                "," + std::to_string(c) + ")");
      }
      if (cell.width != spec.width || cell.height != spec.height) {
        throw DimensionError("stitch: cell size differs from patch size");
      }
      for (int y = 0; y < spec.height; ++y) {
        std::copy_n(cell.mask.begin() + static_cast<std::ptrdiff_t>(y) * spec.width,
                    spec.width,
                    out.mask.begin() +
                        (static_cast<std::ptrdiff_t>(r) * spec.height + y) * out.width +
                        static_cast<std::ptrdiff_t>(c) * spec.width);
      }
    }
  }
  return out;
}

}  // namespace fodloc
