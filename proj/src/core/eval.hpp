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
#include <functional>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/pipeline.hpp"
#include "core/training.hpp"

namespace fodloc {

/// Area IoU of half-open integer boxes; 0 when either box is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

struct Match {
  std::size_t prediction = 0;
  std::size_t truth = 0;
  double iou = 0.0;
};

struct PatchMatch {
  std::string patch_id;
  std::vector<Match> matches;  // only pairs with IoU > threshold
  std::size_t n_predictions = 0;
  std::size_t n_truths = 0;

  std::size_t n_correct() const { return matches.size(); }
  std::size_t false_positives() const { return n_predictions - matches.size(); }
};

/// Greedy one-to-one matching in descending IoU order (ties: lower prediction
/// index, then lower truth index). A pair is eligible iff IoU > threshold.
PatchMatch match_detections(const std::vector<BoundingBox>& predictions,
                            const std::vector<BoundingBox>& truths,
                            double iou_threshold,
                            const std::string& patch_id = {});

struct EvalReport {
  double iou_threshold = 0.3;
  std::size_t n_ground_truth = 0;
  std::size_t n_correct = 0;
  std::size_t n_false_positive = 0;
  double detection_rate = 0.0;
  /// Set when there is no ground truth; the rate is then 0.
  bool empty = true;
  std::vector<PatchMatch> patches;
};

/// n_correct / n_ground_truth, or 0 for an empty ground-truth set.
double detection_rate(std::size_t n_correct, std::size_t n_ground_truth);

EvalReport detection_rate(const std::vector<PatchMatch>& patches,
                          double iou_threshold);

/// Groups detections and ground truth by patch id and scores them.
EvalReport evaluate(const std::vector<Detection>& detections,
                    const std::vector<GroundTruth>& truths,
                    double iou_threshold = 0.3);

struct SweepPoint {
  double iou_threshold = 0.0;
  double detection_rate = 0.0;
};
using SweepCurve = std::vector<SweepPoint>;

/// Thresholds must be strictly increasing inside (0, 1).
SweepCurve threshold_sweep(const std::vector<Detection>& detections,
                           const std::vector<GroundTruth>& truths,
                           const std::vector<double>& thresholds);

/// 0.1, 0.2, ..., 0.9.
std::vector<double> default_sweep_thresholds();

void write_eval_report_csv(const EvalReport& report,
                           const std::filesystem::path& path);
/// Two columns: iou_threshold,detection_rate.
void write_sweep_csv(const SweepCurve& curve, const std::filesystem::path& path);

// -------------------------------------------------------------- ablation

enum class AblationOutcome { kScored, kNoneWeak, kNoneStrong, kFailed };

std::string to_string(AblationOutcome outcome);

struct AblationRow {
  std::string name;
  AutoencoderSpec spec;
  AblationOutcome outcome = AblationOutcome::kFailed;
  /// Rate at the evaluation IoU; computed for every trained row.
  double detection_rate = 0.0;
  /// Held-out clean reconstruction MSE.
  double clean_mse = 0.0;
  /// Median over clean patches of the mean difference-map value.
  double median_clean_difference = 0.0;
  /// Fraction of FOD patches whose Otsu outcome is Degenerate.
  double degenerate_fraction = 0.0;
  /// Fraction of clean patches that produced a detection.
  double clean_false_positive_rate = 0.0;
  SweepCurve sweep;
  std::string error;

  /// Rate as a percentage, or the sentinel name.
  std::string display() const;
};

struct AblationData {
  std::vector<Image> train_clean;
  std::vector<Image> clean_test;
  std::vector<Image> fod_test;
  std::vector<std::string> fod_ids;
  std::vector<GroundTruth> fod_truths;
};

struct AblationConfig {
  TrainConfig train;
  LocalizeOptions localize;
  double iou_threshold = 0.3;
  double weak_delta = 0.2;
  std::vector<double> sweep_thresholds = default_sweep_thresholds();
};

struct AblationEvaluation {
  AblationRow row;
  std::vector<Detection> detections;
};

/// Scores an already trained model on the ablation test sets.
AblationEvaluation evaluate_model(const Autoencoder<float>& model,
                                  const AblationData& data,
                                  const AblationConfig& cfg);

using AblationProgress = std::function<void(const AblationRow&)>;

/// Trains and scores each spec in order. A spec whose training throws is
/// reported as kFailed with the error text and the run continues.
std::vector<AblationRow> run_ablation(const std::vector<AutoencoderSpec>& specs,
                                      const AblationData& data,
                                      const AblationConfig& cfg,
                                      const AblationProgress& progress = {});

/// Columns: model,result,detection_rate,clean_mse,median_clean_difference,
/// degenerate_fraction,clean_false_positive_rate,error.
void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);

/// Fraction of crops whose argmax label matches; the set must be non-empty.
double classifier_accuracy(const Classifier<float>& model,
                           const std::vector<LabeledCrop>& crops);

}  // namespace fodloc
