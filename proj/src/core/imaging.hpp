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

#include <cstdint>
#include <optional>
#include <vector>

#include "core/image.hpp"

namespace fodloc {

/// Single-channel per-pixel dissimilarity in [0, 1]; row-major.
struct DifferenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double mean() const;
  /// Mean over a box; 0 for an empty box.
  double mean_in(const BoundingBox& box) const;
};

/// Binary mask; row-major, one byte per pixel holding 0 or 1.
struct SegmentationMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  /// Absent for mosaics assembled from several patches.
  std::optional<double> threshold_used;

  std::uint8_t at(int x, int y) const {
    return mask[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t count() const;
};

struct CroppedLocalization {
  Image image;
  BoundingBox box;
};

/// A threshold chosen by Otsu's method. `bin` is the last histogram bin of
/// the background class; `value` is that bin's upper edge.
struct OtsuThreshold {
  double value = 0.0;
  int bin = 0;
};

/// Histogram bin of a value in [0, 1] for `bins` equal bins. Bins are closed
/// on the right, so `v > (k + 1) / bins` holds exactly when the bin exceeds k.
int histogram_bin(double v, int bins);

/// |reconstruction - original| averaged over channels.
DifferenceMap difference_map(const Image& original, const Image& reconstruction);

/// (1 - SSIM) / 2 per pixel, channel-averaged. The window is a square of odd
/// side `window`, clipped at the image border.
DifferenceMap ssim_map(const Image& original, const Image& reconstruction,
                       int window = 7);

/// Otsu threshold over a `bins`-bin histogram of [0, 1]. Returns nullopt (the
/// Degenerate outcome) when the binned total variance is below 1e-12, i.e.
/// every value falls into a single bin. Ties go to the lowest bin.
std::optional<OtsuThreshold> otsu_threshold(const DifferenceMap& map,
                                            int bins = 256);

/// mask = value > t.
SegmentationMap threshold_map(const DifferenceMap& map, double t);

/// Tight box around every set pixel, or nullopt for an empty mask.
std::optional<BoundingBox> extreme_points(const SegmentationMap& seg);

/// Clears the mask when fewer than `min_pixels` pixels are set.
SegmentationMap min_area_filter(const SegmentationMap& seg,
                                std::size_t min_pixels);

CroppedLocalization crop(const Image& patch, const BoundingBox& box);

/// Writes a crop back into `dst` at its source box.
void paste(Image& dst, const CroppedLocalization& crop);

/// Mosaics a row-major grid of equally sized masks. A short row or an empty
/// cell is a CompletenessError.
SegmentationMap stitch_segmentation(
    const std::vector<std::vector<SegmentationMap>>& grid,
    const PatchSpec& spec);

}  // namespace fodloc
