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
#include "core/nn/layers.hpp"
#include "core/nn/vit.hpp"

namespace fodloc {

enum class VitPlacement { kNone, kOuter, kInner, kLatent };

std::string to_string(VitPlacement placement);
VitPlacement parse_vit_placement(const std::string& name);

enum class BlockKind { kConv, kViT };
enum class BlockLocation { kOuter, kInner, kLatent };
enum class BlockSide { kEncoder, kDecoder };
enum class Resample { kDown2, kUp2, kNone };

/// One learning block as realized by build_autoencoder: the first layer
/// (convolution or ViT) followed, outside the latent position, by batch norm,
/// ReLU and the resampling step.
struct LearningBlockSpec {
  BlockKind kind = BlockKind::kConv;
  BlockLocation location = BlockLocation::kOuter;
  BlockSide side = BlockSide::kEncoder;
  int in_channels = 0;
  int out_channels = 0;
  Resample resample = Resample::kNone;
  int height = 0;  // spatial size seen by the first layer
  int width = 0;
};

struct AutoencoderSpec {
  int depth = 3;
  VitPlacement vit_placement = VitPlacement::kNone;
  bool skip_connections = false;
  int base_channels = 16;
  PatchSpec input_size{128, 128};
  nn::ViTLayerSpec vit;
  /// With kOuter, substitute only the encoder's outermost block.
  bool vit_encoder_only = false;

  /// Throws ConfigError when the input side is not divisible by 2^depth or
  /// the ViT token patch does not tile the feature map at its placement.
  void validate() const;
  /// Encoder blocks (outer to inner), the latent block, then decoder blocks
  /// (inner to outer).
  std::vector<LearningBlockSpec> blocks() const;
  std::string name() const;

  friend bool operator==(const AutoencoderSpec&, const AutoencoderSpec&) = default;
};

std::string spec_to_json(const AutoencoderSpec& spec);
AutoencoderSpec spec_from_json(const std::string& json);

/// Applies comma-separated key=value overrides such as
/// "depth=3,vit=outer,skip=false,base=16,size=128x128".
AutoencoderSpec parse_autoencoder_spec(const std::string& text,
                                       AutoencoderSpec base = {});

/// (n, 3, h, w) tensor from equally sized RGB images and back.
template <typename T>
nn::Tensor<T> images_to_tensor(const std::vector<const Image*>& images);
template <typename T>
Image tensor_to_image(const nn::Tensor<T>& t, int index);

template <typename T>
class Autoencoder {
 public:
  Autoencoder(const AutoencoderSpec& spec, std::uint64_t seed);

  const AutoencoderSpec& spec() const { return spec_; }

  /// Inference path (batch norm uses running statistics).
  nn::Tensor<T> forward(const nn::Tensor<T>& x) const;
  /// Training path; caches activations for backward().
  nn::Tensor<T> forward_train(const nn::Tensor<T>& x);
  nn::Tensor<T> backward(const nn::Tensor<T>& dy);

  std::vector<nn::NamedParam<T>> parameters();
  void zero_grad();

  /// Layers exposed for structural tests.
  nn::Layer<T>& encoder_first(int i) { return enc_[i][0]; }
  nn::Layer<T>& decoder_first(int j) { return dec_[j][0]; }
  nn::Layer<T>& latent() { return *latent_; }
  nn::Conv2d<T>& output_conv() { return *final_; }
  /// Number of ViT layers in the realized network.
  int vit_layer_count() const;
  /// Encoder activations (before pooling) from the last forward_train().
  const std::vector<nn::Tensor<T>>& skip_features() const { return skips_; }

 private:
  nn::Tensor<T> run(const nn::Tensor<T>& x, bool train);

  AutoencoderSpec spec_;
  std::vector<nn::Sequential<T>> enc_;
  std::vector<nn::MaxPool2<T>> pool_;
  nn::LayerPtr<T> latent_;
  std::vector<nn::Sequential<T>> dec_;
  std::unique_ptr<nn::Conv2d<T>> final_;
  nn::Sigmoid<T> sigmoid_;
  std::vector<nn::Tensor<T>> skips_;
};

std::unique_ptr<Autoencoder<float>> build_autoencoder(
    const AutoencoderSpec& spec, std::uint64_t seed);

/// Reconstructs one patch; the patch must match the model's input size.
Image reconstruct(const Autoencoder<float>& model, const Image& patch);

/// Copies every parameter and buffer between models of the same spec.
template <typename From, typename To>
void copy_parameters(Autoencoder<From>& from, Autoencoder<To>& to);

// ------------------------------------------------------------ classifier

struct ClassifierSpec {
  std::vector<std::string> labels;
  int input_size = 32;
  int width = 16;

  int n_classes() const { return static_cast<int>(labels.size()); }
  void validate() const;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// Compact residual CNN: stem conv, two residual stages separated by max
/// pooling, global average pooling and a linear head.
template <typename T>
class Classifier {
 public:
  Classifier(const ClassifierSpec& spec, std::uint64_t seed);

  const ClassifierSpec& spec() const { return spec_; }
  int n_classes() const { return spec_.n_classes(); }

  /// Logits of shape (n, 1, 1, n_classes).
  nn::Tensor<T> forward(const nn::Tensor<T>& x) const;
  nn::Tensor<T> forward_train(const nn::Tensor<T>& x);
  nn::Tensor<T> backward(const nn::Tensor<T>& dy);

  std::vector<nn::NamedParam<T>> parameters();
  void zero_grad();

 private:
  ClassifierSpec spec_;
  nn::Sequential<T> net_;
};

/// n_classes generic labels "class0", "class1", ...
std::unique_ptr<Classifier<float>> build_classifier(int n_classes,
                                                    int input_size,
                                                    std::uint64_t seed);
std::unique_ptr<Classifier<float>> build_classifier(const ClassifierSpec& spec,
                                                    std::uint64_t seed);

/// Row-wise softmax over the last dimension.
template <typename T>
std::vector<std::vector<double>> softmax_rows(const nn::Tensor<T>& logits);

/// Aspect-preserving bilinear resize so the longer side equals `size`,
/// centered on a black size x size canvas.
Image prepare_crop(const Image& crop, int size);

struct ClassPrediction {
  int index = 0;
  std::string label;
  double score = 0.0;
  std::vector<double> distribution;
};

ClassPrediction classify(const Classifier<float>& model, const Image& crop);

// ----------------------------------------------------------- checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(Autoencoder<float>& model, const std::filesystem::path& path);
void save_checkpoint(Classifier<float>& model, const std::filesystem::path& path);

/// Rebuilds the model from the embedded spec. Throws CheckpointError on a bad
/// magic number, version, kind or parameter set.
std::unique_ptr<Autoencoder<float>> load_autoencoder(
    const std::filesystem::path& path);
/// As above, and the embedded spec must equal `expected`.
std::unique_ptr<Autoencoder<float>> load_autoencoder(
    const std::filesystem::path& path, const AutoencoderSpec& expected);
std::unique_ptr<Classifier<float>> load_classifier(
    const std::filesystem::path& path);

}  // namespace fodloc
