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

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "common/temp_dir.hpp"
#include "core/training.hpp"

using namespace fodloc;

namespace {

std::vector<Image> clean_patches(std::size_t n, int size, std::uint64_t seed) {
  SyntheticSceneConfig cfg;
  cfg.patch_size = {size, size};
  cfg.object_size_min = 2;
  cfg.object_size_max = 4;
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    cfg.seed = mix_seed(seed, i);
    out.push_back(generate_clean_scene(cfg).patch.image);
  }
  return out;
}

AutoencoderSpec tiny_spec(int size = 16) {
  AutoencoderSpec s;
  s.depth = 2;
  s.base_channels = 4;
  s.input_size = {size, size};
  return s;
}

std::vector<std::vector<float>> values(Autoencoder<float>& m) {
  std::vector<std::vector<float>> out;
  for (auto& p : m.parameters()) {
    const auto& v = p.param->value.storage();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

}  // namespace

TEST_CASE("mse loss") {
  nn::Tensor<float> a(1, 1, 1, 2), b(1, 1, 1, 2);
  CHECK(mse_loss(a, a) == 0.0);
  b.fill(1.0f);
  CHECK(mse_loss(b, a) == 1.0);
  a[1] = 1.0f;  // Z = (0, 1), Z' = (1, 1)
  CHECK(mse_loss(b, a) == 0.5);
  CHECK_THROWS_AS(mse_loss(a, nn::Tensor<float>(1, 1, 1, 3)), DimensionError);
  Image x(2, 2, 3, 0.25f), y(2, 2, 3, 0.75f);
  CHECK(mse_loss(x, y) == 0.25);
  CHECK_THROWS_AS(mse_loss(x, Image(3, 2, 3)), DimensionError);
}

TEST_CASE("mse gradient matches its definition") {
  nn::Tensor<double> r(1, 1, 2, 2), t(1, 1, 2, 2);
  for (int i = 0; i < 4; ++i) {
    r[i] = 0.1 * i;
    t[i] = 0.05 * i * i;
  }
  const auto g = mse_grad(r, t);
  for (int i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(2.0 * (r[i] - t[i]) / 4));
}

TEST_CASE("cross entropy loss") {
  CHECK(cross_entropy_loss({1.0, 0.0}, {1.0, 0.0}) == 0.0);
  CHECK(cross_entropy_loss({0.5, 0.5}, {1.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK(cross_entropy_loss({0.25, 0.25, 0.25, 0.25}, {0, 0, 1, 0}) ==
        doctest::Approx(std::log(4.0)));
  // The clamp keeps a zero probability finite.
  CHECK(cross_entropy_loss({0.0, 1.0}, {1.0, 0.0}) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy_loss({0.5, 0.5}, {1.0, 0.0, 0.0}), DimensionError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.validation_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_optimizer("sgd") == OptimizerKind::kSgd);
  CHECK(parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), ConfigError);
}

TEST_CASE("split indices partition the data deterministically") {
  const auto [train, val] = split_indices(50, 0.1, 3);
  CHECK(train.size() == 45);
  CHECK(val.size() == 5);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(val.begin(), val.end());
  CHECK(all.size() == 50);
  CHECK(split_indices(50, 0.1, 3) == std::make_pair(train, val));
  CHECK(split_indices(50, 0.0, 3).second.empty());
  // Never leaves the training side empty.
  CHECK(split_indices(1, 0.5, 3).first.size() == 1);
}

TEST_CASE("autoencoder training lowers the loss") {
  const auto data = clean_patches(64, 16, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.validation_fraction = 0.0;
  const auto run = train_autoencoder(data, tiny_spec(), cfg);
  REQUIRE(run.history.train_loss.size() == 5);
  CHECK(run.history.val_loss.size() == 5);
  CHECK(run.history.train_loss.back() < run.history.train_loss.front());
  for (double l : run.history.train_loss) CHECK(l >= 0.0);
}

TEST_CASE("zero epochs return the initialization") {
  const auto data = clean_patches(4, 16, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  auto run = train_autoencoder(data, tiny_spec(), cfg);
  CHECK(run.history.train_loss.empty());
  CHECK(run.history.best_epoch == -1);
  Autoencoder<float> init(tiny_spec(), cfg.seed);
  CHECK(values(*run.model) == values(init));
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto data = clean_patches(24, 16, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  auto a = train_autoencoder(data, tiny_spec(), cfg);
  auto b = train_autoencoder(data, tiny_spec(), cfg);
  CHECK(a.history == b.history);
  CHECK(values(*a.model) == values(*b.model));
  cfg.seed = 8;
  auto c = train_autoencoder(data, tiny_spec(), cfg);
  CHECK(!(a.history == c.history));
}

TEST_CASE("the returned parameters come from the best validation epoch") {
  const auto data = clean_patches(40, 16, 4);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.learning_rate = 0.05;  // noisy on purpose
  auto run = train_autoencoder(data, tiny_spec(), cfg);
  const auto& v = run.history.val_loss;
  const auto best = std::min_element(v.begin(), v.end()) - v.begin();
  CHECK(run.history.best_epoch == best);
  const auto [train_idx, val_idx] = split_indices(data.size(), cfg.validation_fraction, cfg.seed);
  double sum = 0;
  for (auto i : val_idx) sum += mse_loss(reconstruct(*run.model, data[i]), data[i]);
  CHECK(sum / val_idx.size() == doctest::Approx(v[best]).epsilon(1e-5));
}

TEST_CASE("a vanishing learning rate leaves parameters unchanged") {
  const auto data = clean_patches(8, 16, 5);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.validation_fraction = 0.0;
  Autoencoder<float> init(tiny_spec(), cfg.seed);
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    cfg.optimizer = kind;
    cfg.learning_rate = 1e-30;
    auto run = train_autoencoder(data, tiny_spec(), cfg);
    // Batch-norm running statistics move regardless of the step size.
    auto a = run.model->parameters();
    auto b = init.parameters();
    double moved = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].trainable) continue;
      for (std::size_t k = 0; k < a[i].param->value.size(); ++k) {
        moved = std::max(moved, static_cast<double>(std::abs(a[i].param->value[k] -
                                                             b[i].param->value[k])));
      }
    }
    CHECK(moved < 1e-20);
  }
}

TEST_CASE("training input errors") {
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_autoencoder({}, tiny_spec(), cfg), DataError);
  CHECK_THROWS_AS(train_autoencoder(clean_patches(2, 32, 1), tiny_spec(16), cfg), DataError);
  auto bad = clean_patches(4, 16, 1);
  for (auto& img : bad) img.pixels()[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_autoencoder(bad, tiny_spec(), cfg);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("optimizers follow their update rules") {
  nn::Param<float> p(nn::Shape{1, 1, 1, 2});
  p.value[0] = 1.0f;
  p.value[1] = -2.0f;
  p.grad[0] = 0.5f;
  p.grad[1] = -1.0f;
  std::vector<nn::NamedParam<float>> params{{"p", &p, true}};
  Sgd<float> sgd(0.1, 0.0);
  sgd.step(params);
  CHECK(p.value[0] == doctest::Approx(0.95f));
  CHECK(p.value[1] == doctest::Approx(-1.9f));
  // The first Adam step moves every coordinate by lr against the gradient sign.
  Adam<float> adam(0.01);
  adam.step(params);
  CHECK(p.value[0] == doctest::Approx(0.94f).epsilon(1e-5));
  CHECK(p.value[1] == doctest::Approx(-1.89f).epsilon(1e-5));
}

TEST_CASE("classifier training") {
  SyntheticSceneConfig cfg;
  cfg.seed = 31;
  const auto crops = generate_labeled_crops(cfg, {ObjectShape::kDisk, ObjectShape::kBar}, 40);
  TrainConfig tc;
  tc.epochs = 2;
  const auto run = train_classifier(crops, tc, 16);
  CHECK(run.model->spec().labels == std::vector<std::string>{"bar", "disk"});
  CHECK(run.history.val_accuracy.size() == 2);
  for (double a : run.history.val_accuracy) CHECK((a >= 0.0 && a <= 1.0));

  std::vector<LabeledCrop> one_class(crops.begin(), crops.end());
  for (auto& c : one_class) c.label = "disk";
  CHECK_THROWS_AS(train_classifier(one_class, tc, 16), DataError);
  CHECK_THROWS_AS(train_classifier({}, tc, 16), DataError);
}

TEST_CASE("history csv") {
  testing::TempDir dir;
  TrainHistory h;
  h.train_loss = {0.5, 0.25};
  h.val_loss = {0.4, 0.3};
  write_history_csv(h, dir / "h.csv");
  std::ifstream in(dir / "h.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "epoch,train_loss,val_loss");
  CHECK(row == "0,0.5,0.4");
  h.val_accuracy = {0.6, 0.7};
  write_history_csv(h, dir / "c.csv");
  std::ifstream in2(dir / "c.csv");
  std::getline(in2, header);
  CHECK(header == "epoch,train_loss,val_loss,val_accuracy");
}
