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

#include "core/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>

#include "core/rng.hpp"

namespace fodloc {

using nn::NamedParam;
using nn::Tensor;

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(validation_fraction >= 0 && validation_fraction < 1)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
  if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
}

void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const bool acc = !history.val_accuracy.empty();
  out << "epoch,train_loss,val_loss" << (acc ? ",val_accuracy" : "") << '\n';
  out << std::setprecision(9);
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    out << e << ',' << history.train_loss[e] << ',' << history.val_loss[e];
    if (acc) out << ',' << history.val_accuracy[e];
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------- losses

template <typename T>
double mse_loss(const Tensor<T>& reconstruction, const Tensor<T>& target) {
  nn::require_same_shape(reconstruction, target, "mse_loss");
  if (target.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = static_cast<double>(reconstruction[i]) - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(target.size());
}

double mse_loss(const Image& reconstruction, const Image& target) {
  if (reconstruction.width() != target.width() ||
      reconstruction.height() != target.height() ||
      reconstruction.channels() != target.channels()) {
    throw DimensionError("mse_loss: image size mismatch");
  }
  const auto& a = reconstruction.pixels();
  const auto& b = target.pixels();
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

template <typename T>
Tensor<T> mse_grad(const Tensor<T>& reconstruction, const Tensor<T>& target) {
  nn::require_same_shape(reconstruction, target, "mse_grad");
  Tensor<T> g(target.shape());
  const T scale = T(2) / static_cast<T>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    g[i] = scale * (reconstruction[i] - target[i]);
  }
  return g;
}

double cross_entropy_loss(const std::vector<double>& prediction,
                          const std::vector<double>& label) {
  if (prediction.size() != label.size()) {
    throw DimensionError("cross_entropy_loss: length mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] != 0.0) loss -= label[i] * std::log(std::max(prediction[i], 1e-12));
  }
  return loss;
}

// ------------------------------------------------------------ optimizers

template <typename T>
void Sgd<T>::step(std::vector<NamedParam<T>>& params) {
  if (velocity_.empty()) {
    for (auto& p : params) velocity_.emplace_back(p.param->value.shape());
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    auto& value = params[k].param->value;
    const auto& grad = params[k].param->grad;
    auto& vel = velocity_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = static_cast<T>(momentum_ * vel[i] + grad[i]);
      value[i] -= static_cast<T>(lr_ * vel[i]);
    }
  }
}

template <typename T>
void Adam<T>::step(std::vector<NamedParam<T>>& params) {
  if (m_.empty()) {
    for (auto& p : params) {
      m_.emplace_back(p.param->value.shape());
      v_.emplace_back(p.param->value.shape());
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  const T b1 = static_cast<T>(beta1_);
  const T b2 = static_cast<T>(beta2_);
  const T lr_t = static_cast<T>(lr_ / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(eps_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    T* value = params[k].param->value.data();
    const T* grad = params[k].param->grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    const std::size_t n = params[k].param->value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
      v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
      value[i] -= lr_t * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
std::unique_ptr<Optimizer<T>> make_optimizer(const TrainConfig& cfg) {
  if (cfg.optimizer == OptimizerKind::kAdam) {
    return std::make_unique<Adam<T>>(cfg.learning_rate);
  }
  return std::make_unique<Sgd<T>>(cfg.learning_rate, cfg.momentum);
}

// -------------------------------------------------------------- training

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x5EED));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * n));
  if (n_val >= n) n_val = n > 0 ? n - 1 : 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {train, val};
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
}

template <typename T>
std::vector<Tensor<T>> snapshot(std::vector<NamedParam<T>>& params) {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(p.param->value);
  return out;
}

template <typename T>
void restore(std::vector<NamedParam<T>>& params, const std::vector<Tensor<T>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = values[i];
}

std::vector<const Image*> gather(const std::vector<Image>& images,
                                 const std::vector<std::size_t>& idx,
                                 std::size_t begin, std::size_t end) {
  std::vector<const Image*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&images[idx[i]]);
  return out;
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                       " (loss is not finite)");
  }
}

}  // namespace

AutoencoderRun train_autoencoder(const std::vector<Image>& clean,
                                 const AutoencoderSpec& spec,
                                 const TrainConfig& cfg,
                                 const EpochCallback& on_epoch) {
  cfg.validate();
  spec.validate();
  if (clean.empty()) throw DataError("training set is empty");
  for (const auto& img : clean) {
    if (img.width() != spec.input_size.width ||
        img.height() != spec.input_size.height || img.channels() != 3) {
      throw DataError("training patch " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) +
                      " does not match the model input size");
    }
  }
  AutoencoderRun run{build_autoencoder(spec, cfg.seed), {}};
  auto& model = *run.model;
  auto params = model.parameters();
  auto optimizer = make_optimizer<float>(cfg);
  auto [train_idx, val_idx] = split_indices(clean.size(), cfg.validation_fraction, cfg.seed);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor<float>> best_values;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle(train_idx, rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < train_idx.size(); b += bs) {
      const std::size_t e = std::min(train_idx.size(), b + bs);
      const Tensor<float> x = images_to_tensor<float>(gather(clean, train_idx, b, e));
      model.zero_grad();
      const Tensor<float> y = model.forward_train(x);
      const double loss = mse_loss(y, x);
      check_finite(loss, epoch);
      model.backward(mse_grad(y, x));
      optimizer->step(params);
      sum += loss * static_cast<double>(e - b);
    }
    const double train_loss = sum / static_cast<double>(train_idx.size());
    double val_loss = train_loss;
    if (!val_idx.empty()) {
      double vsum = 0.0;
      for (std::size_t b = 0; b < val_idx.size(); b += bs) {
        const std::size_t e = std::min(val_idx.size(), b + bs);
        const Tensor<float> x = images_to_tensor<float>(gather(clean, val_idx, b, e));
        vsum += mse_loss(model.forward(x), x) * static_cast<double>(e - b);
      }
      val_loss = vsum / static_cast<double>(val_idx.size());
    }
    check_finite(val_loss, epoch);
    run.history.train_loss.push_back(train_loss);
    run.history.val_loss.push_back(val_loss);
    if (val_loss < best) {
      best = val_loss;
      best_values = snapshot(params);
      run.history.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  if (!best_values.empty()) restore(params, best_values);
  return run;
}

ClassifierRun train_classifier(const std::vector<LabeledCrop>& crops,
                               const TrainConfig& cfg, int input_size,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  if (crops.empty()) throw DataError("classifier training set is empty");
  std::set<std::string> distinct;
  for (const auto& c : crops) distinct.insert(c.label);
  if (distinct.size() < 2) {
    throw DataError("classifier training needs at least 2 classes, found " +
                    std::to_string(distinct.size()));
  }
  ClassifierSpec spec;
  spec.labels.assign(distinct.begin(), distinct.end());
  spec.input_size = input_size;
  ClassifierRun run{build_classifier(spec, cfg.seed), {}};
  auto& model = *run.model;
  auto params = model.parameters();
  auto optimizer = make_optimizer<float>(cfg);

  std::vector<Image> inputs;
  std::vector<int> targets;
  inputs.reserve(crops.size());
  for (const auto& c : crops) {
    inputs.push_back(prepare_crop(c.image, input_size));
    targets.push_back(static_cast<int>(
        std::find(spec.labels.begin(), spec.labels.end(), c.label) - spec.labels.begin()));
  }
  auto [train_idx, val_idx] = split_indices(crops.size(), cfg.validation_fraction, cfg.seed);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const int k = spec.n_classes();

  auto evaluate = [&](const std::vector<std::size_t>& idx, double& loss, double& acc) {
    double lsum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < idx.size(); b += bs) {
      const std::size_t e = std::min(idx.size(), b + bs);
      const auto probs = softmax_rows(
          model.forward(images_to_tensor<float>(gather(inputs, idx, b, e))));
      for (std::size_t r = 0; r < probs.size(); ++r) {
        const int t = targets[idx[b + r]];
        std::vector<double> onehot(k, 0.0);
        onehot[t] = 1.0;
        lsum += cross_entropy_loss(probs[r], onehot);
        const int arg = static_cast<int>(std::max_element(probs[r].begin(), probs[r].end()) -
                                         probs[r].begin());
        correct += arg == t ? 1 : 0;
      }
    }
    loss = lsum / static_cast<double>(idx.size());
    acc = static_cast<double>(correct) / static_cast<double>(idx.size());
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor<float>> best_values;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle(train_idx, rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < train_idx.size(); b += bs) {
      const std::size_t e = std::min(train_idx.size(), b + bs);
      const Tensor<float> x = images_to_tensor<float>(gather(inputs, train_idx, b, e));
      model.zero_grad();
      const Tensor<float> logits = model.forward_train(x);
      const auto probs = softmax_rows(logits);
      Tensor<float> grad(logits.shape());
      const double n = static_cast<double>(e - b);
      for (std::size_t r = 0; r < probs.size(); ++r) {
        const int t = targets[train_idx[b + r]];
        std::vector<double> onehot(k, 0.0);
        onehot[t] = 1.0;
        sum += cross_entropy_loss(probs[r], onehot);
        for (int c = 0; c < k; ++c) {
          grad[r * k + c] = static_cast<float>((probs[r][c] - onehot[c]) / n);
        }
      }
      check_finite(sum, epoch);
      model.backward(grad);
      optimizer->step(params);
    }
    const double train_loss = sum / static_cast<double>(train_idx.size());
    double val_loss = train_loss;
    double val_acc = 0.0;
    if (!val_idx.empty()) {
      evaluate(val_idx, val_loss, val_acc);
    } else {
      double ignored = 0.0;
      evaluate(train_idx, ignored, val_acc);
    }
    check_finite(val_loss, epoch);
    run.history.train_loss.push_back(train_loss);
    run.history.val_loss.push_back(val_loss);
    run.history.val_accuracy.push_back(val_acc);
    if (val_loss < best) {
      best = val_loss;
      best_values = snapshot(params);
      run.history.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  if (!best_values.empty()) restore(params, best_values);
  return run;
}

// ------------------------------------------------------ gradient checking

namespace {

struct Coordinate {
  std::size_t param;
  std::size_t index;
};

std::vector<Coordinate> sample_coordinates(const std::vector<NamedParam<double>>& params,
                                           std::size_t count, std::uint64_t seed) {
  std::vector<Coordinate> all;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].trainable) continue;
    for (std::size_t i = 0; i < params[p].param->value.size(); ++i) all.push_back({p, i});
  }
  Rng rng(seed);
  for (std::size_t i = all.size(); i > 1; --i) {
    std::swap(all[i - 1], all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  if (all.size() > count) all.resize(count);
  return all;
}

template <typename Forward, typename Backward>
GradientCheckResult check(std::vector<NamedParam<double>> params, Forward loss_at,
                          Backward analytic, double epsilon, std::size_t coordinates,
                          std::uint64_t seed) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-3)) {
    throw InvalidArgument("gradient_check epsilon must lie in [1e-6, 1e-3]");
  }
  for (auto& p : params) p.param->zero_grad();
  analytic();
  GradientCheckResult result;
  for (const auto& c : sample_coordinates(params, coordinates, seed)) {
    double& v = params[c.param].param->value[c.index];
    const double saved = v;
    v = saved + epsilon;
    const double up = loss_at();
    v = saved - epsilon;
    const double down = loss_at();
    v = saved;
    const double numeric = (up - down) / (2 * epsilon);
    const double a = params[c.param].param->grad[c.index];
    const double rel = std::fabs(a - numeric) /
                       std::max({std::fabs(a), std::fabs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.coordinates;
  }
  return result;
}

}  // namespace

GradientCheckResult gradient_check(Autoencoder<double>& model,
                                   const Tensor<double>& sample, double epsilon,
                                   std::size_t coordinates, std::uint64_t seed) {
  return check(
      model.parameters(),
      [&] { return mse_loss(model.forward_train(sample), sample); },
      [&] {
        const Tensor<double> y = model.forward_train(sample);
        model.backward(mse_grad(y, sample));
      },
      epsilon, coordinates, seed);
}

GradientCheckResult gradient_check(nn::Layer<double>& layer,
                                   const Tensor<double>& input,
                                   const Tensor<double>& target, double epsilon,
                                   std::size_t coordinates, std::uint64_t seed) {
  std::vector<NamedParam<double>> params;
  layer.collect("layer", params);
  return check(
      params, [&] { return mse_loss(layer.forward_train(input), target); },
      [&] {
        const Tensor<double> y = layer.forward_train(input);
        layer.backward(mse_grad(y, target));
      },
      epsilon, coordinates, seed);
}

template double mse_loss<float>(const Tensor<float>&, const Tensor<float>&);
template double mse_loss<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> mse_grad<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> mse_grad<double>(const Tensor<double>&, const Tensor<double>&);
template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;
template std::unique_ptr<Optimizer<float>> make_optimizer<float>(const TrainConfig&);
template std::unique_ptr<Optimizer<double>> make_optimizer<double>(const TrainConfig&);

}  // namespace fodloc
