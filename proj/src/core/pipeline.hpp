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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/imaging.hpp"
#include "core/model.hpp"

namespace fodloc {

enum class DifferenceKind { kAbsolute, kSsim };

std::string to_string(DifferenceKind kind);
DifferenceKind parse_difference(const std::string& name);

struct LocalizeOptions {
  DifferenceKind difference = DifferenceKind::kAbsolute;
  int ssim_window = 7;
  int bins = 256;
  std::size_t min_area = 0;
};

struct Detection {
  std::string patch_id;
  BoundingBox box;
  double mean_difference = 0.0;
  std::optional<std::string> label;
  std::optional<double> score;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Every intermediate of one patch localization.
struct PatchAnalysis {
  DifferenceMap difference;
  std::optional<OtsuThreshold> threshold;  // nullopt: Degenerate
  SegmentationMap segmentation;
  std::optional<Detection> detection;
};

/// difference -> Otsu -> threshold -> min-area filter -> extreme points, from
/// an existing reconstruction.
PatchAnalysis analyze_reconstruction(const Image& original,
                                     const Image& reconstruction,
                                     const std::string& patch_id,
                                     const LocalizeOptions& options = {});

PatchAnalysis analyze_patch(const Autoencoder<float>& model, const Image& patch,
                            const std::string& patch_id,
                            const LocalizeOptions& options = {});

/// None when Otsu is Degenerate or the mask ends up empty.
std::optional<Detection> localize_patch(const Autoencoder<float>& model,
                                        const Image& patch,
                                        const std::string& patch_id,
                                        const LocalizeOptions& options = {});

struct FrameLocalization {
  /// Row-major by grid cell; boxes in resized-frame coordinates.
  std::vector<Detection> detections;
  SegmentationMap mask;
  int rows = 0;
  int cols = 0;
};

/// Patch id used by localize_frame for grid cell (row, col).
std::string patch_id_for(const std::string& source_id, int row, int col);

/// Resizes to the grid, localizes every patch (on up to `jobs` threads) and
/// stitches the masks. The model input size must equal `spec`.
FrameLocalization localize_frame(const Autoencoder<float>& model,
                                 const Frame& frame, const PatchSpec& spec,
                                 const LocalizeOptions& options = {},
                                 int jobs = 1);

struct UnknownPolicy {
  double score_threshold = 0.5;
  std::optional<std::filesystem::path> save_dir;

  void validate() const;
  /// True when a prediction with this score keeps its label. A threshold of
  /// 1 accepts nothing, even a softmax score that rounded to exactly 1.
  bool accepts(double score) const {
    return score_threshold < 1.0 && score >= score_threshold;
  }
};

inline constexpr const char* kUnknownLabel = "unknown";

/// Crops and classifies each detection; a score below the threshold becomes
/// "unknown" and, with a save_dir, the crop is written as
/// <patch_id>_<index>.png. Save failures are appended to `warnings`.
std::vector<Detection> classify_detections(const Classifier<float>& classifier,
                                           const Image& patch,
                                           std::vector<Detection> detections,
                                           const UnknownPolicy& policy,
                                           std::vector<std::string>* warnings = nullptr);

inline constexpr const char* kDetectionHeader =
    "patch_id,x_min,y_min,x_max,y_max,mean_difference,label,score";

void write_detections_csv(const std::vector<Detection>& detections,
                          const std::filesystem::path& path);
std::vector<Detection> read_detections_csv(const std::filesystem::path& path);
std::vector<Detection> parse_detections_csv(const std::string& text);

}  // namespace fodloc
