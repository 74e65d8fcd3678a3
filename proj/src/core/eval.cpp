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

#include "core/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fodloc {

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const long long ix = std::max(0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const long long iy = std::max(0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const long long inter = ix * iy;
  const long long uni = static_cast<long long>(a.area()) + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PatchMatch match_detections(const std::vector<BoundingBox>& predictions,
                            const std::vector<BoundingBox>& truths,
                            double iou_threshold, const std::string& patch_id) {
  std::vector<Match> candidates;
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    for (std::size_t t = 0; t < truths.size(); ++t) {
      const double v = iou(predictions[p], truths[t]);
      if (v > iou_threshold) candidates.push_back({p, t, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Match& a, const Match& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(predictions.size(), false);
  std::vector<bool> truth_used(truths.size(), false);
  PatchMatch out{patch_id, {}, predictions.size(), truths.size()};
  for (const auto& m : candidates) {
    if (pred_used[m.prediction] || truth_used[m.truth]) continue;
    pred_used[m.prediction] = truth_used[m.truth] = true;
    out.matches.push_back(m);
  }
  return out;
}

double detection_rate(std::size_t n_correct, std::size_t n_ground_truth) {
  if (n_ground_truth == 0) return 0.0;
  return static_cast<double>(n_correct) / static_cast<double>(n_ground_truth);
}

EvalReport detection_rate(const std::vector<PatchMatch>& patches,
                          double iou_threshold) {
  EvalReport r;
  r.iou_threshold = iou_threshold;
  for (const auto& p : patches) {
    r.n_ground_truth += p.n_truths;
    r.n_correct += p.n_correct();
    r.n_false_positive += p.false_positives();
  }
  r.empty = r.n_ground_truth == 0;
  r.detection_rate = detection_rate(r.n_correct, r.n_ground_truth);
  r.patches = patches;
  return r;
}

EvalReport evaluate(const std::vector<Detection>& detections,
                    const std::vector<GroundTruth>& truths,
                    double iou_threshold) {
  std::map<std::string, std::pair<std::vector<BoundingBox>, std::vector<BoundingBox>>> by_patch;
  for (const auto& d : detections) by_patch[d.patch_id].first.push_back(d.box);
  for (const auto& t : truths) by_patch[t.patch_id].second.push_back(t.box);
  std::vector<PatchMatch> matches;
  matches.reserve(by_patch.size());
  for (const auto& [id, boxes] : by_patch) {
    matches.push_back(match_detections(boxes.first, boxes.second, iou_threshold, id));
  }
  return detection_rate(matches, iou_threshold);
}

std::vector<double> default_sweep_thresholds() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

SweepCurve threshold_sweep(const std::vector<Detection>& detections,
                           const std::vector<GroundTruth>& truths,
                           const std::vector<double>& thresholds) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
      throw InvalidArgument("sweep thresholds must lie in (0, 1)");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw InvalidArgument("sweep thresholds must be strictly increasing");
    }
  }
  SweepCurve curve;
  for (double t : thresholds) {
    curve.push_back({t, evaluate(detections, truths, t).detection_rate});
  }
  return curve;
}

void write_eval_report_csv(const EvalReport& report,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(9);
  out << "iou_threshold,n_ground_truth,n_correct,n_false_positive,detection_rate,empty\n";
  out << report.iou_threshold << ',' << report.n_ground_truth << ','
      << report.n_correct << ',' << report.n_false_positive << ','
      << report.detection_rate << ',' << (report.empty ? "true" : "false") << '\n';
  out << "\npatch_id,n_predictions,n_truths,n_correct,false_positives\n";
  for (const auto& p : report.patches) {
    out << p.patch_id << ',' << p.n_predictions << ',' << p.n_truths << ','
        << p.n_correct() << ',' << p.false_positives() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_sweep_csv(const SweepCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iou_threshold,detection_rate\n" << std::setprecision(9);
  for (const auto& p : curve) out << p.iou_threshold << ',' << p.detection_rate << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

// -------------------------------------------------------------- ablation

std::string to_string(AblationOutcome outcome) {
  switch (outcome) {
    case AblationOutcome::kScored: return "scored";
    case AblationOutcome::kNoneWeak: return "None-Weak";
    case AblationOutcome::kNoneStrong: return "None-Strong";
    case AblationOutcome::kFailed: return "failed";
  }
  return "failed";
}

std::string AblationRow::display() const {
  if (outcome != AblationOutcome::kScored) return to_string(outcome);
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << detection_rate * 100.0;
  return os.str();
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

AblationEvaluation evaluate_model(const Autoencoder<float>& model,
                                  const AblationData& data,
                                  const AblationConfig& cfg) {
  AblationEvaluation ev;
  AblationRow& row = ev.row;
  row.name = model.spec().name();
  row.spec = model.spec();

  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < data.fod_test.size(); ++i) {
    const auto a = analyze_patch(model, data.fod_test[i], data.fod_ids[i], cfg.localize);
    if (!a.threshold) ++degenerate;
    if (a.detection) ev.detections.push_back(*a.detection);
  }
  row.degenerate_fraction =
      data.fod_test.empty() ? 0.0
                            : static_cast<double>(degenerate) / data.fod_test.size();

  std::vector<double> clean_diffs;
  double mse_sum = 0.0;
  std::size_t false_positives = 0;
  for (const auto& img : data.clean_test) {
    const Image rec = reconstruct(model, img);
    mse_sum += mse_loss(rec, img);
    const auto a = analyze_reconstruction(img, rec, "clean", cfg.localize);
    clean_diffs.push_back(a.difference.mean());
    if (a.detection) ++false_positives;
  }
  if (!data.clean_test.empty()) {
    row.clean_mse = mse_sum / data.clean_test.size();
    row.clean_false_positive_rate =
        static_cast<double>(false_positives) / data.clean_test.size();
  }
  row.median_clean_difference = median(clean_diffs);

  row.detection_rate = evaluate(ev.detections, data.fod_truths, cfg.iou_threshold).detection_rate;
  row.sweep = threshold_sweep(ev.detections, data.fod_truths, cfg.sweep_thresholds);

  // A majority of Degenerate outcomes makes the median outcome Degenerate.
  if (2 * degenerate > data.fod_test.size()) {
    row.outcome = AblationOutcome::kNoneStrong;
  } else if (row.median_clean_difference > cfg.weak_delta) {
    row.outcome = AblationOutcome::kNoneWeak;
  } else {
    row.outcome = AblationOutcome::kScored;
  }
  return ev;
}

std::vector<AblationRow> run_ablation(const std::vector<AutoencoderSpec>& specs,
                                      const AblationData& data,
                                      const AblationConfig& cfg,
                                      const AblationProgress& progress) {
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    AblationRow row;
    try {
      const auto run = train_autoencoder(data.train_clean, spec, cfg.train);
      row = evaluate_model(*run.model, data, cfg).row;
    } catch (const std::exception& e) {
      row = AblationRow{};
      row.name = spec.name();
      row.spec = spec;
      row.outcome = AblationOutcome::kFailed;
      row.error = e.what();
    }
    if (progress) progress(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,result,detection_rate,clean_mse,median_clean_difference,"
         "degenerate_fraction,clean_false_positive_rate,error\n"
      << std::setprecision(9);
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.name << ',' << r.display() << ',' << r.detection_rate << ','
        << r.clean_mse << ',' << r.median_clean_difference << ','
        << r.degenerate_fraction << ',' << r.clean_false_positive_rate << ','
        << err << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

double classifier_accuracy(const Classifier<float>& model,
                           const std::vector<LabeledCrop>& crops) {
  if (crops.empty()) throw DataError("classifier_accuracy needs a non-empty set");
  std::size_t correct = 0;
  for (const auto& c : crops) correct += classify(model, c.image).label == c.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(crops.size());
}

}  // namespace fodloc
