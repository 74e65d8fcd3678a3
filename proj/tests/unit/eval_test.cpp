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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "common/oracles.hpp"
#include "common/temp_dir.hpp"
#include "core/eval.hpp"

using namespace fodloc;

namespace {

BoundingBox random_box(Rng& rng, int extent) {
  const int x0 = static_cast<int>(rng.uniform_int(0, extent - 2));
  const int y0 = static_cast<int>(rng.uniform_int(0, extent - 2));
  return {x0, y0, static_cast<int>(rng.uniform_int(x0 + 1, extent)),
          static_cast<int>(rng.uniform_int(y0 + 1, extent))};
}

Detection det(const std::string& id, BoundingBox b) { return Detection{id, b, 0.5, {}, {}}; }
GroundTruth gt(const std::string& id, BoundingBox b) { return GroundTruth{id, b, "obj"}; }

}  // namespace

TEST_CASE("iou examples") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));
  CHECK(oracle::raster_iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0));
}

TEST_CASE("iou agrees with the pixel-count oracle and is symmetric") {
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_box(rng, 40);
    const auto b = random_box(rng, 40);
    const double v = iou(a, b);
    CHECK(std::abs(v - oracle::raster_iou(a, b)) < 1e-9);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("matching is greedy, one-to-one and strict") {
  const BoundingBox g{0, 0, 10, 10};
  // IoU 0.5 exactly: a 10x5 box inside the ground truth.
  CHECK(match_detections({{0, 0, 10, 5}}, {g}, 0.3).n_correct() == 1);
  CHECK(match_detections({{0, 0, 10, 5}}, {g}, 0.5).n_correct() == 0);

  const auto two = match_detections({{0, 0, 10, 9}, {0, 0, 10, 8}}, {g}, 0.3);
  CHECK(two.n_correct() == 1);
  CHECK(two.false_positives() == 1);
  CHECK(two.matches[0].prediction == 0);

  const auto none = match_detections({}, {g, {20, 20, 30, 30}}, 0.3);
  CHECK(none.n_correct() == 0);
  CHECK(none.n_truths == 2);
}

TEST_CASE("matching never reuses a prediction or a truth") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BoundingBox> preds, truths;
    for (int i = 0; i < rng.uniform_int(0, 5); ++i) preds.push_back(random_box(rng, 20));
    for (int i = 0; i < rng.uniform_int(0, 5); ++i) truths.push_back(random_box(rng, 20));
    const auto m = match_detections(preds, truths, rng.uniform(0.0, 0.9));
    std::vector<int> used_p(preds.size()), used_t(truths.size());
    for (const auto& x : m.matches) {
      CHECK(++used_p[x.prediction] == 1);
      CHECK(++used_t[x.truth] == 1);
    }
  }
}

TEST_CASE("detection rate arithmetic") {
  CHECK(detection_rate(447, 447) == 1.0);
  CHECK(detection_rate(0, 0) == 0.0);
  CHECK(detection_rate(370, 447) == doctest::Approx(0.8277).epsilon(1e-4));
  CHECK(detection_rate(369, 447) == doctest::Approx(0.8255).epsilon(1e-4));
  const auto empty = evaluate({}, {}, 0.3);
  CHECK(empty.empty);
  CHECK(empty.detection_rate == 0.0);
}

TEST_CASE("perfect detections score 1 and the rate ignores patch order") {
  Rng rng(12);
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
  for (int i = 0; i < 40; ++i) {
    const auto b = random_box(rng, 64);
    const std::string id = "p" + std::to_string(i);
    gts.push_back(gt(id, b));
    if (i % 3 != 0) dets.push_back(det(id, b));
    else dets.push_back(det(id, b.translated(b.width(), 0)));
  }
  const auto base = evaluate(dets, gts, 0.3);
  std::vector<Detection> perfect;
  for (const auto& g : gts) perfect.push_back(det(g.patch_id, g.box));
  CHECK(evaluate(perfect, gts, 0.3).detection_rate == 1.0);

  std::mt19937 shuffle_rng(1);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(dets.begin(), dets.end(), shuffle_rng);
    std::shuffle(gts.begin(), gts.end(), shuffle_rng);
    const auto r = evaluate(dets, gts, 0.3);
    CHECK(r.n_correct == base.n_correct);
    CHECK(r.detection_rate == base.detection_rate);
  }
}

TEST_CASE("sweep curves are non-increasing for arbitrary prediction sets") {
  Rng rng(31);
  const auto thresholds = default_sweep_thresholds();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    const int patches = static_cast<int>(rng.uniform_int(1, 8));
    for (int p = 0; p < patches; ++p) {
      const std::string id = "p" + std::to_string(p);
      for (int i = 0; i < rng.uniform_int(0, 3); ++i) gts.push_back(gt(id, random_box(rng, 32)));
      for (int i = 0; i < rng.uniform_int(0, 3); ++i) dets.push_back(det(id, random_box(rng, 32)));
    }
    const auto curve = threshold_sweep(dets, gts, thresholds);
    REQUIRE(curve.size() == thresholds.size());
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].detection_rate <= curve[i - 1].detection_rate);
    }
  }
}

TEST_CASE("sweep input validation and single-point case") {
  const std::vector<Detection> dets{det("a", {0, 0, 10, 10})};
  const std::vector<GroundTruth> gts{gt("a", {0, 0, 10, 8})};
  const auto one = threshold_sweep(dets, gts, {0.3});
  REQUIRE(one.size() == 1);
  CHECK(one[0].detection_rate == evaluate(dets, gts, 0.3).detection_rate);
  CHECK_THROWS_AS(threshold_sweep(dets, gts, {0.5, 0.3}), InvalidArgument);
  CHECK_THROWS_AS(threshold_sweep(dets, gts, {0.3, 0.3}), InvalidArgument);
  CHECK_THROWS_AS(threshold_sweep(dets, gts, {0.0, 0.3}), InvalidArgument);
  CHECK_THROWS_AS(threshold_sweep(dets, gts, {0.3, 1.0}), InvalidArgument);
}

TEST_CASE("report and sweep CSV files") {
  testing::TempDir dir("eval");
  const std::vector<Detection> dets{det("a", {0, 0, 10, 10}), det("b", {0, 0, 4, 4})};
  const std::vector<GroundTruth> gts{gt("a", {0, 0, 10, 8})};
  write_eval_report_csv(evaluate(dets, gts, 0.3), dir / "r.csv");
  std::ifstream r(dir / "r.csv");
  std::string header, row;
  std::getline(r, header);
  std::getline(r, row);
  CHECK(header == "iou_threshold,n_ground_truth,n_correct,n_false_positive,detection_rate,empty");
  CHECK(row == "0.3,1,1,1,1,false");

  write_sweep_csv(threshold_sweep(dets, gts, {0.5, 0.9}), dir / "s.csv");
  std::ifstream s(dir / "s.csv");
  std::string l1, l2, l3;
  std::getline(s, l1);
  std::getline(s, l2);
  std::getline(s, l3);
  CHECK(l1 == "iou_threshold,detection_rate");
  CHECK(l2 == "0.5,1");
  CHECK(l3 == "0.9,0");
}

TEST_CASE("detection CSV round trip and row-numbered errors") {
  testing::TempDir dir("dets");
  std::vector<Detection> dets{det("a", {1, 2, 3, 4}),
                              Detection{"b", {0, 0, 5, 5}, 0.25, std::string("bolt"), 0.75}};
  write_detections_csv(dets, dir / "d.csv");
  CHECK(read_detections_csv(dir / "d.csv") == dets);

  const std::string header = std::string(kDetectionHeader) + "\n";
  CHECK(parse_detections_csv(header).empty());
  try {
    parse_detections_csv(header + "a,1,2,3,4,0.1,,\nb,1,x,3,4,0.1,,\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_detections_csv(header + "a,1,2,3\n"), ParseError);
  CHECK_THROWS_AS(parse_detections_csv("wrong,header\n"), ParseError);
  CHECK_THROWS_AS(parse_detections_csv(header + "a,5,2,3,4,0.1,,\n"), ValidationError);
  CHECK_THROWS_AS(parse_detections_csv(header + "a,1,2,3,4,0.1,bolt,\n"), ValidationError);
}

namespace {

std::unique_ptr<Autoencoder<float>> constant_half_model() {
  AutoencoderSpec spec;
  spec.depth = 1;
  spec.base_channels = 2;
  spec.input_size = {16, 16};
  auto m = build_autoencoder(spec, 1);
  // Zero output layer: sigmoid(0) = 0.5 everywhere.
  m->output_conv().weight().value.fill(0.0f);
  m->output_conv().bias().value.fill(0.0f);
  return m;
}

AblationData data_with(float clean_level, bool fod_constant) {
  AblationData d;
  Rng rng(3);
  for (int i = 0; i < 4; ++i) d.clean_test.emplace_back(16, 16, 3, clean_level);
  for (int i = 0; i < 5; ++i) {
    d.fod_ids.push_back("f" + std::to_string(i));
    d.fod_test.push_back(fod_constant ? Image(16, 16, 3, 0.5f) : oracle::random_image(rng, 16, 16));
    d.fod_truths.push_back(gt(d.fod_ids.back(), {2, 2, 9, 9}));
  }
  return d;
}

}  // namespace

TEST_CASE("ablation outcome classification") {
  const auto model = constant_half_model();
  AblationConfig cfg;

  SUBCASE("degenerate majority is None-Strong") {
    const auto row = evaluate_model(*model, data_with(0.5f, true), cfg).row;
    CHECK(row.outcome == AblationOutcome::kNoneStrong);
    CHECK(row.degenerate_fraction == 1.0);
    CHECK(row.display() == "None-Strong");
  }
  SUBCASE("large clean differences are None-Weak") {
    const auto row = evaluate_model(*model, data_with(0.0f, false), cfg).row;
    CHECK(row.outcome == AblationOutcome::kNoneWeak);
    CHECK(row.median_clean_difference == doctest::Approx(0.5));
    CHECK(row.clean_mse == doctest::Approx(0.25));
    CHECK(row.display() == "None-Weak");
  }
  SUBCASE("otherwise scored") {
    const auto row = evaluate_model(*model, data_with(0.5f, false), cfg).row;
    CHECK(row.outcome == AblationOutcome::kScored);
    CHECK(row.clean_false_positive_rate == 0.0);
    CHECK(row.sweep.size() == 9);
  }
}

TEST_CASE("run_ablation: empty list, per-row failures and the table file") {
  testing::TempDir dir("abl");
  AblationConfig cfg;
  cfg.train.epochs = 1;
  const auto data = data_with(0.5f, false);
  CHECK(run_ablation({}, data, cfg).empty());

  AutoencoderSpec bad;  // 128x128 input, data are 16x16: training throws
  AutoencoderSpec good;
  good.depth = 1;
  good.base_channels = 2;
  good.input_size = {16, 16};
  AblationData train = data;
  train.train_clean = data.clean_test;
  int calls = 0;
  const auto rows = run_ablation({bad, good}, train, cfg, [&](const AblationRow&) { ++calls; });
  REQUIRE(rows.size() == 2);
  CHECK(calls == 2);
  CHECK(rows[0].outcome == AblationOutcome::kFailed);
  CHECK_FALSE(rows[0].error.empty());
  CHECK(rows[1].outcome != AblationOutcome::kFailed);

  write_ablation_csv(rows, dir / "t.csv");
  std::ifstream in(dir / "t.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "model,result,detection_rate,clean_mse,median_clean_difference,degenerate_fraction,"
        "clean_false_positive_rate,error");
}

TEST_CASE("classifier accuracy of an uninformed model is near chance") {
  const auto model = build_classifier(2, 32, 17);
  Rng rng(23);
  std::vector<LabeledCrop> crops;
  for (int i = 0; i < 1000; ++i) {
    crops.push_back({oracle::random_image(rng, 12, 12), rng.bernoulli(0.5) ? "class0" : "class1"});
  }
  const double acc = classifier_accuracy(*model, crops);
  CHECK(acc == doctest::Approx(0.5).epsilon(0.1));  // within 0.05
  CHECK_THROWS_AS(classifier_accuracy(*model, {}), DataError);

  std::vector<LabeledCrop> self;
  for (int i = 0; i < 20; ++i) {
    Image img = oracle::random_image(rng, 10, 10);
    self.push_back({img, classify(*model, img).label});
  }
  CHECK(classifier_accuracy(*model, self) == 1.0);
}
