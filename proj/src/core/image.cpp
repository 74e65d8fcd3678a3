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

#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>

namespace fodloc {

Image::Image(int width, int height, int channels, float fill)
    : width_(width),
      height_(height),
      channels_(channels),
      pixels_(static_cast<std::size_t>(width) * height * channels, fill) {
  if (width < 0 || height < 0 || channels < 0) {
    throw SizeError("negative image dimension");
  }
}

void PatchSpec::validate() const {
  if (width < 16 || height < 16) {
    throw ConfigError("patch size must be at least 16x16, got " +
                      std::to_string(width) + "x" + std::to_string(height));
  }
}

Image read_rgb(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("no such file: " + path.string());
  }
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot decode image: " + path.string());
  if (raw.channels() != 3) {
    throw FormatError(path.string() + ": expected 3 channels, found " +
                      std::to_string(raw.channels()));
  }
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) {
    throw FormatError(path.string() + ": expected 8- or 16-bit channels");
  }
  // Divide rather than multiply by a reciprocal so that 8-bit values map to
  // exactly what quantize_8bit produces.
  const float full = raw.depth() == CV_16U ? 65535.0f : 255.0f;
  Image out(raw.cols, raw.rows, 3);
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        // OpenCV stores BGR.
        const float v = raw.depth() == CV_16U
                            ? static_cast<float>(raw.ptr<cv::Vec3w>(y)[x][2 - c])
                            : static_cast<float>(raw.ptr<cv::Vec3b>(y)[x][2 - c]);
        out.at(x, y, c) = v / full;
      }
    }
  }
  return out;
}

void write_rgb_png(const Image& image, const std::filesystem::path& path) {
  if (image.channels() != 3) throw FormatError("write_rgb_png needs 3 channels");
  cv::Mat m(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(x, y, c), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), m)) {
    throw IoError("cannot write " + path.string());
  }
}

void write_mask_png(const std::vector<std::uint8_t>& mask, int width,
                    int height, const std::filesystem::path& path) {
  cv::Mat m(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < width; ++x) {
      row[x] = mask[static_cast<std::size_t>(y) * width + x] ? 255 : 0;
    }
  }
  const std::vector<int> params = {cv::IMWRITE_PNG_BILEVEL, 1};
  if (!cv::imwrite(path.string(), m, params)) {
    throw IoError("cannot write " + path.string());
  }
}

std::vector<std::uint8_t> read_mask_png(const std::filesystem::path& path,
                                        int& width, int& height) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot decode mask: " + path.string());
  width = m.cols;
  height = m.rows;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] = row[x] > 127 ? 1 : 0;
    }
  }
  return out;
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (auto& v : out.pixels()) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) /
        255.0f;
  }
  return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (width <= 0 || height <= 0) throw SizeError("resize to empty image");
  if (width == image.width() && height == image.height()) return image;
  Image out(width, height, image.channels());
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top =
            image.at(x0, y0, c) * (1 - wx) + image.at(x1, y0, c) * wx;
        const double bottom =
            image.at(x0, y1, c) * (1 - wx) + image.at(x1, y1, c) * wx;
        out.at(x, y, c) = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

}  // namespace fodloc
