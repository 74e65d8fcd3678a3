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

#include "core/pipeline.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "core/csv.hpp"
#include "core/data.hpp"

namespace fodloc {

std::string to_string(DifferenceKind kind) {
  return kind == DifferenceKind::kSsim ? "ssim" : "absolute";
}

DifferenceKind parse_difference(const std::string& name) {
  if (name == "absolute") return DifferenceKind::kAbsolute;
  if (name == "ssim") return DifferenceKind::kSsim;
  throw ConfigError("unknown difference method '" + name +
                    "' (expected absolute or ssim)");
}

PatchAnalysis analyze_reconstruction(const Image& original,
                                     const Image& reconstruction,
                                     const std::string& patch_id,
                                     const LocalizeOptions& options) {
  PatchAnalysis a;
  a.difference = options.difference == DifferenceKind::kSsim
                     ? ssim_map(original, reconstruction, options.ssim_window)
                     : difference_map(original, reconstruction);
  a.threshold = otsu_threshold(a.difference, options.bins);
  if (!a.threshold) {
    a.segmentation = SegmentationMap{
        a.difference.width, a.difference.height,
        std::vector<std::uint8_t>(a.difference.values.size(), 0), std::nullopt};
    return a;
  }
  a.segmentation = min_area_filter(threshold_map(a.difference, a.threshold->value),
                                   options.min_area);
  if (const auto box = extreme_points(a.segmentation)) {
    a.detection = Detection{patch_id, *box, a.difference.mean_in(*box),
                            std::nullopt, std::nullopt};
  }
  return a;
}

PatchAnalysis analyze_patch(const Autoencoder<float>& model, const Image& patch,
                            const std::string& patch_id,
                            const LocalizeOptions& options) {
  return analyze_reconstruction(patch, reconstruct(model, patch), patch_id, options);
}

std::optional<Detection> localize_patch(const Autoencoder<float>& model,
                                        const Image& patch,
                                        const std::string& patch_id,
                                        const LocalizeOptions& options) {
  return analyze_patch(model, patch, patch_id, options).detection;
}

std::string patch_id_for(const std::string& source_id, int row, int col) {
  return source_id + "_r" + std::to_string(row) + "_c" + std::to_string(col);
}

FrameLocalization localize_frame(const Autoencoder<float>& model,
                                 const Frame& frame, const PatchSpec& spec,
                                 const LocalizeOptions& options, int jobs) {
  if (!(model.spec().input_size == spec)) {
    throw DimensionError("frame patch size differs from the model input size");
  }
  const Frame resized = resize_to_grid(frame, spec);
  const auto patches = split_into_patches(resized, spec);
  FrameLocalization out;
  out.rows = resized.height() / spec.height;
  out.cols = resized.width() / spec.width;

  // A frame that is exactly one patch keeps its own id.
  const bool single = patches.size() == 1;
  std::vector<PatchAnalysis> results(patches.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < patches.size(); i = next++) {
      try {
        const auto& cell = *patches[i].cell;
        results[i] = analyze_patch(
            model, patches[i].image,
            single ? frame.source_id : patch_id_for(frame.source_id, cell.row, cell.col),
            options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(patches.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::vector<SegmentationMap>> grid(out.rows);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& cell = *patches[i].cell;
    grid[cell.row].push_back(std::move(results[i].segmentation));
    if (auto& det = results[i].detection) {
      det->box = det->box.translated(cell.col * spec.width, cell.row * spec.height);
      out.detections.push_back(std::move(*det));
    }
  }
  out.mask = stitch_segmentation(grid, spec);
  return out;
}

void UnknownPolicy::validate() const {
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw ConfigError("unknown-score threshold must lie in [0, 1]");
  }
}

std::vector<Detection> classify_detections(const Classifier<float>& classifier,
                                           const Image& patch,
                                           std::vector<Detection> detections,
                                           const UnknownPolicy& policy,
                                           std::vector<std::string>* warnings) {
  policy.validate();
  for (std::size_t i = 0; i < detections.size(); ++i) {
    auto& det = detections[i];
    const CroppedLocalization c = crop(patch, det.box);
    const ClassPrediction p = classify(classifier, c.image);
    det.score = p.score;
    if (policy.accepts(p.score)) {
      det.label = p.label;
      continue;
    }
    det.label = kUnknownLabel;
    if (!policy.save_dir) continue;
    const auto path = *policy.save_dir / (det.patch_id + "_" + std::to_string(i) + ".png");
    try {
      std::filesystem::create_directories(*policy.save_dir);
      write_rgb_png(c.image, path);
    } catch (const std::exception& e) {
      if (warnings) warnings->push_back("could not save unknown crop: " + std::string(e.what()));
    }
  }
  return detections;
}

void write_detections_csv(const std::vector<Detection>& detections,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kDetectionHeader << '\n' << std::setprecision(9);
  for (const auto& d : detections) {
    out << d.patch_id << ',' << d.box.x_min << ',' << d.box.y_min << ','
        << d.box.x_max << ',' << d.box.y_max << ',' << d.mean_difference << ','
        << d.label.value_or("") << ',';
    if (d.score) out << *d.score;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Detection> parse_detections_csv(const std::string& text) {
  const auto rows = csv::lines(text);
  if (rows.empty() || csv::trim(rows[0]) != kDetectionHeader) {
    throw ParseError(csv::where(1) + "expected header '" + kDetectionHeader + "'");
  }
  std::vector<Detection> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    if (csv::trim(rows[i]).empty()) continue;
    const auto f = csv::split(rows[i]);
    if (f.size() != 8) {
      throw ParseError(csv::where(line_no) + "expected 8 fields, got " +
                       std::to_string(f.size()));
    }
    Detection d;
    d.patch_id = f[0];
    d.box = {csv::to_int(f[1], line_no, "x_min"), csv::to_int(f[2], line_no, "y_min"),
             csv::to_int(f[3], line_no, "x_max"), csv::to_int(f[4], line_no, "y_max")};
    if (!d.box.valid()) throw ValidationError(csv::where(line_no) + "empty box");
    d.mean_difference = csv::to_double(f[5], line_no, "mean_difference");
    if (!f[6].empty()) d.label = f[6];
    if (!f[7].empty()) d.score = csv::to_double(f[7], line_no, "score");
    if (d.label.has_value() != d.score.has_value()) {
      throw ValidationError(csv::where(line_no) + "label and score must be given together");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> read_detections_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_detections_csv(text.str());
}

}  // namespace fodloc
