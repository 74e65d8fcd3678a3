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
#include <string>
#include <vector>

#include "core/image.hpp"

namespace fodloc {

struct GroundTruth {
  std::string patch_id;
  BoundingBox box;
  std::string label;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// ------------------------------------------------------------- frames

/// Loads an RGB frame; the source id is the file stem.
Frame load_frame(const std::filesystem::path& path);

/// Resamples (bilinear) to floor(W/N)*N x floor(H/M)*M. A frame smaller than
/// one patch in either dimension is a SizeError.
Frame resize_to_grid(const Frame& frame, const PatchSpec& spec);

/// Row-major, non-overlapping patches. Dimensions must be exact multiples.
std::vector<ImagePatch> split_into_patches(const Frame& frame,
                                           const PatchSpec& spec);

/// Inverse of split_into_patches for a complete grid.
Image assemble_patches(const std::vector<ImagePatch>& patches,
                       const PatchSpec& spec, int rows, int cols);

// -------------------------------------------------------- annotations

inline constexpr const char* kAnnotationHeader =
    "patch_id,x_min,y_min,x_max,y_max,label";

/// Parses the annotation CSV. Boxes must be valid and inside `patch`.
/// Throws ParseError (with the 1-based line number) on malformed rows and
/// ValidationError on boxes violating the half-open box invariants.
std::vector<GroundTruth> load_annotations(const std::filesystem::path& path,
                                          const PatchSpec& patch);
std::vector<GroundTruth> parse_annotations(const std::string& text,
                                           const PatchSpec& patch);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<GroundTruth>& truths);

// ------------------------------------------------------ synthetic data

enum class ObjectShape { kDisk, kRectangle, kTriangle, kBar };

std::string to_string(ObjectShape shape);
ObjectShape parse_shape(const std::string& name);

/// Controls the pavement-like background and the pasted debris objects.
/// Lengths are in pixels, intensities in [0, 1].
struct SyntheticSceneConfig {
  std::uint64_t seed = 7;
  PatchSpec patch_size{128, 128};

  // Background: base gray, linear gradient, band-limited noise built from
  // random plane waves, optional white grain, paint markings and cracks.
  double base_gray_min = 0.35;
  double base_gray_max = 0.60;
  double tint = 0.02;
  double gradient_amplitude = 0.08;
  double noise_amplitude = 0.03;
  int noise_components = 6;
  double noise_min_wavelength = 24.0;
  double noise_max_wavelength = 96.0;
  double grain_amplitude = 0.0;
  double marking_probability = 0.25;
  double marking_width_min = 3.0;
  double marking_width_max = 7.0;
  double crack_probability = 0.0;

  // Objects.
  int object_count_min = 1;
  int object_count_max = 1;
  int object_size_min = 12;
  int object_size_max = 32;
  std::vector<ObjectShape> shapes{ObjectShape::kDisk, ObjectShape::kRectangle,
                                  ObjectShape::kTriangle, ObjectShape::kBar};
  double color_min = 0.0;
  double color_max = 1.0;
  double min_contrast = 0.25;
  double fraction_clean = 0.0;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct SyntheticScene {
  ImagePatch patch;
  std::vector<GroundTruth> truths;
  /// One full-patch 0/1 mask per ground truth, in the same order.
  std::vector<std::vector<std::uint8_t>> masks;
};

/// Deterministic in `config` (the seed included).
SyntheticScene generate_synthetic_scene(const SyntheticSceneConfig& config,
                                        const std::string& patch_id = "scene");

/// Same background model with no objects.
SyntheticScene generate_clean_scene(const SyntheticSceneConfig& config,
                                    const std::string& patch_id = "scene");

struct LabeledCrop {
  Image image;
  std::string label;
};

/// `count` crops cut at the tight box of a single object, cycling through
/// `shapes`; the label is the shape name.
std::vector<LabeledCrop> generate_labeled_crops(
    const SyntheticSceneConfig& config, const std::vector<ObjectShape>& shapes,
    std::size_t count);

// ----------------------------------------------------------- datasets

enum class Split { kTrain, kTest };

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  Split split = Split::kTrain;
  PatchSpec size;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  std::string annotations = "annotations.csv";

  std::size_t count(Split split) const;
};

inline constexpr const char* kManifestHeader = "path,split,width,height";

/// Writes `n_train_clean` clean patches under train/, `n_test` patches under
/// test/ (object presence drawn with config.fraction_clean), the annotation
/// CSV for the test split and manifest.csv.
DatasetManifest build_dataset(const SyntheticSceneConfig& config,
                              std::size_t n_train_clean, std::size_t n_test,
                              const std::filesystem::path& out_dir);

/// Writes crops under crops/ and crops/labels.csv (path,label).
void build_crop_dataset(const SyntheticSceneConfig& config,
                        const std::vector<ObjectShape>& shapes,
                        std::size_t count, const std::filesystem::path& out_dir);

std::vector<LabeledCrop> load_crop_dataset(const std::filesystem::path& dir);

void write_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Per-patch seeds used by build_dataset, exposed for in-memory experiments.
std::uint64_t train_scene_seed(std::uint64_t seed, std::size_t index);
std::uint64_t test_scene_seed(std::uint64_t seed, std::size_t index);

std::string split_name(Split split);

}  // namespace fodloc
