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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace fodloc {

/// Interleaved (HWC) float image with intensities in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }

  float& at(int x, int y, int c) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<float>& pixels() { return pixels_; }
  const std::vector<float>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> pixels_;
};

/// Patch size in pixels.
struct PatchSpec {
  int width = 448;
  int height = 448;

  void validate() const;
  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

struct GridCell {
  int row = 0;
  int col = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Integer pixel box, half-open: [x_min, x_max) x [y_min, y_max).
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  long long area() const {
    return static_cast<long long>(width()) * height();
  }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool inside(int w, int h) const {
    return valid() && x_min >= 0 && y_min >= 0 && x_max <= w && y_max <= h;
  }
  BoundingBox translated(int dx, int dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// A decoded video frame.
struct Frame {
  Image image;
  std::string source_id;

  int width() const { return image.width(); }
  int height() const { return image.height(); }
};

/// The unit of reconstruction: an N x M x 3 block, optionally tagged with its
/// position in the frame grid it was cut from.
struct ImagePatch {
  Image image;
  std::optional<GridCell> cell;

  int width() const { return image.width(); }
  int height() const { return image.height(); }
};

/// Reads a PNG/JPEG as RGB in [0, 1]. Throws IoError when unreadable and
/// FormatError when the file is not 3-channel.
Image read_rgb(const std::filesystem::path& path);

/// Writes 8-bit-per-channel RGB PNG.
void write_rgb_png(const Image& image, const std::filesystem::path& path);

/// Writes a 0/1 mask as a 1-bit grayscale PNG.
void write_mask_png(const std::vector<std::uint8_t>& mask, int width,
                    int height, const std::filesystem::path& path);

/// Reads a mask PNG back as 0/1 values.
std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path,
                                        int& width, int& height);

/// Round-trips intensities through 8-bit quantization (what a PNG stores).
Image quantize_8bit(const Image& image);

/// Bilinear resampling with pixel-center alignment.
Image resize_bilinear(const Image& image, int width, int height);

}  // namespace fodloc
