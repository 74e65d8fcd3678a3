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
#include <functional>
#include <memory>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"

namespace fodloc {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 7;
  double validation_fraction = 0.1;
  double momentum = 0.0;  // SGD only

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;  // classifier runs only
  /// 0-based epoch whose parameters were returned; -1 when none ran.
  int best_epoch = -1;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

/// Writes epoch,train_loss,val_loss[,val_accuracy] rows.
void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path);

// ---------------------------------------------------------------- losses

/// Mean of squared element differences.
template <typename T>
double mse_loss(const nn::Tensor<T>& reconstruction, const nn::Tensor<T>& target);
double mse_loss(const Image& reconstruction, const Image& target);

/// d(mse)/d(reconstruction).
template <typename T>
nn::Tensor<T> mse_grad(const nn::Tensor<T>& reconstruction,
                       const nn::Tensor<T>& target);

/// -sum(y_i log max(p_i, 1e-12)).
double cross_entropy_loss(const std::vector<double>& prediction,
                          const std::vector<double>& label);

// ------------------------------------------------------------ optimizers

template <typename T>
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Updates every trainable parameter from its accumulated gradient.
  virtual void step(std::vector<nn::NamedParam<T>>& params) = 0;
};

template <typename T>
class Sgd final : public Optimizer<T> {
 public:
  Sgd(double learning_rate, double momentum)
      : lr_(learning_rate), momentum_(momentum) {}
  void step(std::vector<nn::NamedParam<T>>& params) override;

 private:
  double lr_;
  double momentum_;
  std::vector<nn::Tensor<T>> velocity_;
};

template <typename T>
class Adam final : public Optimizer<T> {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(std::vector<nn::NamedParam<T>>& params) override;

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long step_ = 0;
  std::vector<nn::Tensor<T>> m_;
  std::vector<nn::Tensor<T>> v_;
};

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const TrainConfig& cfg);

// -------------------------------------------------------------- training

using EpochCallback = std::function<void(int epoch, double train_loss,
                                         double val_loss)>;

struct AutoencoderRun {
  std::unique_ptr<Autoencoder<float>> model;
  TrainHistory history;
};

/// Minimizes reconstruction MSE on clean patches with shuffled mini-batches
/// and returns the parameters of the epoch with the lowest validation loss.
/// Throws DataError on an empty set or mismatched patch sizes and
/// NumericError when the loss stops being finite.
AutoencoderRun train_autoencoder(const std::vector<Image>& clean,
                                 const AutoencoderSpec& spec,
                                 const TrainConfig& cfg,
                                 const EpochCallback& on_epoch = {});

struct ClassifierRun {
  std::unique_ptr<Classifier<float>> model;
  TrainHistory history;
};

/// Labels are the sorted distinct crop labels. Throws DataError when fewer
/// than two classes are present.
ClassifierRun train_classifier(const std::vector<LabeledCrop>& crops,
                               const TrainConfig& cfg, int input_size = 32,
                               const EpochCallback& on_epoch = {});

/// Deterministic train/validation split used by both trainers: returns
/// (train indices, validation indices).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double validation_fraction, std::uint64_t seed);

// ------------------------------------------------------ gradient checking

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients of the reconstruction MSE against central
/// differences on `coordinates` randomly sampled trainable parameters. The
/// relative error of a coordinate is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(Autoencoder<double>& model,
                                   const nn::Tensor<double>& sample,
                                   double epsilon = 1e-6,
                                   std::size_t coordinates = 64,
                                   std::uint64_t seed = 1);

/// Same check for a single layer, with the loss MSE(layer(x), target).
GradientCheckResult gradient_check(nn::Layer<double>& layer,
                                   const nn::Tensor<double>& input,
                                   const nn::Tensor<double>& target,
                                   double epsilon = 1e-6,
                                   std::size_t coordinates = 64,
                                   std::uint64_t seed = 1);

}  // namespace fodloc
