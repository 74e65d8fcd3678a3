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

#include "core/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "core/rng.hpp"
#include "json.hpp"

namespace fodloc {

using nn::LayerPtr;
using nn::Tensor;

std::string to_string(VitPlacement placement) {
  switch (placement) {
    case VitPlacement::kNone: return "none";
    case VitPlacement::kOuter: return "outer";
    case VitPlacement::kInner: return "inner";
    case VitPlacement::kLatent: return "latent";
  }
  return "none";
}

VitPlacement parse_vit_placement(const std::string& name) {
  for (auto p : {VitPlacement::kNone, VitPlacement::kOuter, VitPlacement::kInner,
                 VitPlacement::kLatent}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown ViT placement '" + name +
                    "' (expected none, outer, inner or latent)");
}

// ------------------------------------------------------------------ spec

std::vector<LearningBlockSpec> AutoencoderSpec::blocks() const {
  const int d = depth;
  const int h0 = input_size.height;
  const int w0 = input_size.width;
  const int latent_ch = base_channels << (d - 1);
  const bool outer = vit_placement == VitPlacement::kOuter;
  const bool inner = vit_placement == VitPlacement::kInner;
  std::vector<LearningBlockSpec> out;
  for (int i = 0; i < d; ++i) {
    LearningBlockSpec b;
    b.side = BlockSide::kEncoder;
    b.location = i == 0 ? BlockLocation::kOuter : BlockLocation::kInner;
    b.kind = (outer && i == 0) || (inner && i == d - 1) ? BlockKind::kViT
                                                        : BlockKind::kConv;
    b.in_channels = i == 0 ? 3 : base_channels << (i - 1);
    b.out_channels = base_channels << i;
    b.resample = Resample::kDown2;
    b.height = h0 >> i;
    b.width = w0 >> i;
    out.push_back(b);
  }
  LearningBlockSpec latent;
  latent.location = BlockLocation::kLatent;
  latent.kind = vit_placement == VitPlacement::kLatent ? BlockKind::kViT
                                                       : BlockKind::kConv;
  latent.in_channels = latent.out_channels = latent_ch;
  latent.height = h0 >> d;
  latent.width = w0 >> d;
  out.push_back(latent);
  const int skip_factor = skip_connections ? 2 : 1;
  for (int j = 0; j < d; ++j) {
    LearningBlockSpec b;
    b.side = BlockSide::kDecoder;
    b.location = j == d - 1 ? BlockLocation::kOuter : BlockLocation::kInner;
    b.kind = (outer && j == d - 1 && !vit_encoder_only) || (inner && j == 0)
                 ? BlockKind::kViT
                 : BlockKind::kConv;
    b.in_channels = j == 0 ? latent_ch : (base_channels << (d - j)) * skip_factor;
    b.out_channels = base_channels << (d - 1 - j);
    b.resample = Resample::kUp2;
    b.height = h0 >> (d - j);
    b.width = w0 >> (d - j);
    out.push_back(b);
  }
  return out;
}

void AutoencoderSpec::validate() const {
  input_size.validate();
  if (depth < 1 || depth > 8) throw ConfigError("depth must be in [1, 8]");
  if (base_channels < 1 || base_channels > 1024) {
    throw ConfigError("base_channels must be in [1, 1024]");
  }
  const int step = 1 << depth;
  if (input_size.width % step != 0 || input_size.height % step != 0) {
    throw ConfigError("input " + std::to_string(input_size.width) + "x" +
                      std::to_string(input_size.height) +
                      " is not divisible by 2^depth = " + std::to_string(step));
  }
  if (vit_placement == VitPlacement::kNone) return;
  if (vit.token_patch < 1 || vit.embed_dim < 1 || vit.heads < 1 ||
      vit.transformer_depth < 0 || vit.mlp_ratio < 1) {
    throw ConfigError("ViT hyperparameters must be positive");
  }
  if (vit.embed_dim % vit.heads != 0) {
    throw ConfigError("ViT embed_dim must be divisible by heads");
  }
  for (const auto& b : blocks()) {
    if (b.kind != BlockKind::kViT) continue;
    if (b.height % vit.token_patch != 0 || b.width % vit.token_patch != 0) {
      throw ConfigError("ViT token patch " + std::to_string(vit.token_patch) +
                        " does not tile the " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + " feature map at its placement");
    }
  }
}

std::string AutoencoderSpec::name() const {
  std::ostringstream os;
  os << "depth" << depth << "-" << to_string(vit_placement)
     << (skip_connections ? "-skip" : "");
  if (vit_placement == VitPlacement::kOuter && vit_encoder_only) os << "-enc";
  return os.str();
}

std::string spec_to_json(const AutoencoderSpec& spec) {
  nlohmann::json j;
  j["depth"] = spec.depth;
  j["vit_placement"] = to_string(spec.vit_placement);
  j["skip_connections"] = spec.skip_connections;
  j["base_channels"] = spec.base_channels;
  j["input_width"] = spec.input_size.width;
  j["input_height"] = spec.input_size.height;
  j["vit_encoder_only"] = spec.vit_encoder_only;
  j["vit"] = {{"token_patch", spec.vit.token_patch},
              {"embed_dim", spec.vit.embed_dim},
              {"heads", spec.vit.heads},
              {"transformer_depth", spec.vit.transformer_depth},
              {"mlp_ratio", spec.vit.mlp_ratio}};
  return j.dump();
}

AutoencoderSpec spec_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    AutoencoderSpec s;
    s.depth = j.at("depth").get<int>();
    s.vit_placement = parse_vit_placement(j.at("vit_placement").get<std::string>());
    s.skip_connections = j.at("skip_connections").get<bool>();
    s.base_channels = j.at("base_channels").get<int>();
    s.input_size = {j.at("input_width").get<int>(), j.at("input_height").get<int>()};
    s.vit_encoder_only = j.at("vit_encoder_only").get<bool>();
    const auto& v = j.at("vit");
    s.vit.token_patch = v.at("token_patch").get<int>();
    s.vit.embed_dim = v.at("embed_dim").get<int>();
    s.vit.heads = v.at("heads").get<int>();
    s.vit.transformer_depth = v.at("transformer_depth").get<int>();
    s.vit.mlp_ratio = v.at("mlp_ratio").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("autoencoder spec: ") + e.what());
  }
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("spec key '" + key + "' expects an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("spec key '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace

AutoencoderSpec parse_autoencoder_spec(const std::string& text,
                                       AutoencoderSpec spec) {
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("spec item '" + item + "' is not key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "depth") {
      spec.depth = to_int(key, value);
    } else if (key == "vit") {
      spec.vit_placement = parse_vit_placement(value);
    } else if (key == "skip") {
      spec.skip_connections = to_bool(key, value);
    } else if (key == "base") {
      spec.base_channels = to_int(key, value);
    } else if (key == "size") {
      const auto x = value.find('x');
      if (x == std::string::npos) {
        spec.input_size = {to_int(key, value), to_int(key, value)};
      } else {
        spec.input_size = {to_int(key, value.substr(0, x)),
                           to_int(key, value.substr(x + 1))};
      }
    } else if (key == "vit_encoder_only") {
      spec.vit_encoder_only = to_bool(key, value);
    } else if (key == "token_patch") {
      spec.vit.token_patch = to_int(key, value);
    } else if (key == "embed_dim") {
      spec.vit.embed_dim = to_int(key, value);
    } else if (key == "heads") {
      spec.vit.heads = to_int(key, value);
    } else if (key == "transformer_depth") {
      spec.vit.transformer_depth = to_int(key, value);
    } else if (key == "mlp_ratio") {
      spec.vit.mlp_ratio = to_int(key, value);
    } else {
      throw ConfigError("unknown spec key '" + key + "'");
    }
  }
  return spec;
}

// --------------------------------------------------------------- tensors

template <typename T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw DimensionError("empty image batch");
  const int w = images.front()->width();
  const int h = images.front()->height();
  Tensor<T> t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.width() != w || img.height() != h || img.channels() != 3) {
      throw DimensionError("image batch must hold equally sized RGB images");
    }
    const float* px = img.pixels().data();
    for (int c = 0; c < 3; ++c) {
      T* dst = t.sample(static_cast<int>(n)) + static_cast<std::size_t>(c) * h * w;
      for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
        dst[i] = static_cast<T>(px[i * 3 + c]);
      }
    }
  }
  return t;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t, int index) {
  if (t.c() != 3) throw DimensionError("expected a 3-channel tensor");
  Image img(t.w(), t.h(), 3);
  float* px = img.pixels().data();
  const std::size_t plane = t.shape().plane();
  for (int c = 0; c < 3; ++c) {
    const T* src = t.sample(index) + c * plane;
    for (std::size_t i = 0; i < plane; ++i) px[i * 3 + c] = static_cast<float>(src[i]);
  }
  return img;
}

// ----------------------------------------------------------- autoencoder

namespace {

template <typename T>
LayerPtr<T> make_first_layer(const LearningBlockSpec& b,
                             const nn::ViTLayerSpec& vit, bool bias, Rng& rng) {
  if (b.kind == BlockKind::kViT) {
    return std::make_unique<nn::ViTLayer<T>>(vit, b.in_channels, b.out_channels,
                                             b.height, b.width, rng);
  }
  return std::make_unique<nn::Conv2d<T>>(b.in_channels, b.out_channels, 3, bias,
                                         rng);
}

}  // namespace

template <typename T>
Autoencoder<T>::Autoencoder(const AutoencoderSpec& spec, std::uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  const auto blocks = spec_.blocks();
  const int d = spec_.depth;
  for (int i = 0; i < d; ++i) {
    const auto& b = blocks[i];
    nn::Sequential<T> seq;
    seq.add(make_first_layer<T>(b, spec_.vit, false, rng));
    seq.add(std::make_unique<nn::BatchNorm2d<T>>(b.out_channels));
    seq.add(std::make_unique<nn::ReLU<T>>());
    enc_.push_back(std::move(seq));
    pool_.emplace_back();
  }
  latent_ = make_first_layer<T>(blocks[d], spec_.vit, true, rng);
  for (int j = 0; j < d; ++j) {
    const auto& b = blocks[d + 1 + j];
    nn::Sequential<T> seq;
    seq.add(make_first_layer<T>(b, spec_.vit, false, rng));
    seq.add(std::make_unique<nn::BatchNorm2d<T>>(b.out_channels));
    seq.add(std::make_unique<nn::ReLU<T>>());
    seq.add(std::make_unique<nn::Upsample2<T>>());
    dec_.push_back(std::move(seq));
  }
  const int final_in = spec_.base_channels * (spec_.skip_connections ? 2 : 1);
  final_ = std::make_unique<nn::Conv2d<T>>(final_in, 3, 3, true, rng);
}

template <typename T>
Tensor<T> Autoencoder<T>::forward(const Tensor<T>& x) const {
  if (x.c() != 3 || x.h() != spec_.input_size.height ||
      x.w() != spec_.input_size.width) {
    throw DimensionError("autoencoder expects [n,3," +
                         std::to_string(spec_.input_size.height) + "," +
                         std::to_string(spec_.input_size.width) + "], got " +
                         x.shape().str());
  }
  const int d = spec_.depth;
  std::vector<Tensor<T>> skips;
  Tensor<T> h = x;
  for (int i = 0; i < d; ++i) {
    Tensor<T> s = enc_[i].forward(h);
    h = pool_[i].forward(s);
    if (spec_.skip_connections) skips.push_back(std::move(s));
  }
  h = latent_->forward(h);
  for (int j = 0; j < d; ++j) {
    h = dec_[j].forward(h);
    if (spec_.skip_connections) h = nn::concat_channels(h, skips[d - 1 - j]);
  }
  return sigmoid_.forward(final_->forward(h));
}

template <typename T>
Tensor<T> Autoencoder<T>::forward_train(const Tensor<T>& x) {
  if (x.c() != 3 || x.h() != spec_.input_size.height ||
      x.w() != spec_.input_size.width) {
    throw DimensionError("autoencoder input shape " + x.shape().str());
  }
  const int d = spec_.depth;
  skips_.clear();
  Tensor<T> h = x;
  for (int i = 0; i < d; ++i) {
    Tensor<T> s = enc_[i].forward_train(h);
    h = pool_[i].forward_train(s);
    skips_.push_back(std::move(s));
  }
  h = latent_->forward_train(h);
  for (int j = 0; j < d; ++j) {
    h = dec_[j].forward_train(h);
    if (spec_.skip_connections) h = nn::concat_channels(h, skips_[d - 1 - j]);
  }
  return sigmoid_.forward_train(final_->forward_train(h));
}

template <typename T>
Tensor<T> Autoencoder<T>::backward(const Tensor<T>& dy) {
  const int d = spec_.depth;
  std::vector<Tensor<T>> skip_grads(d);
  Tensor<T> g = final_->backward(sigmoid_.backward(dy));
  for (int j = d - 1; j >= 0; --j) {
    if (spec_.skip_connections) {
      const int main_ch = spec_.base_channels << (d - 1 - j);
      Tensor<T> main;
      nn::split_channels(g, main_ch, main, skip_grads[d - 1 - j]);
      g = std::move(main);
    }
    g = dec_[j].backward(g);
  }
  g = latent_->backward(g);
  for (int i = d - 1; i >= 0; --i) {
    g = pool_[i].backward(g);
    if (spec_.skip_connections) nn::add_inplace(g, skip_grads[i]);
    g = enc_[i].backward(g);
  }
  return g;
}

template <typename T>
std::vector<nn::NamedParam<T>> Autoencoder<T>::parameters() {
  std::vector<nn::NamedParam<T>> out;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    enc_[i].collect("enc" + std::to_string(i), out);
  }
  latent_->collect("latent", out);
  for (std::size_t j = 0; j < dec_.size(); ++j) {
    dec_[j].collect("dec" + std::to_string(j), out);
  }
  final_->collect("final", out);
  return out;
}

template <typename T>
void Autoencoder<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

template <typename T>
int Autoencoder<T>::vit_layer_count() const {
  int count = 0;
  for (const auto& b : spec_.blocks()) count += b.kind == BlockKind::kViT ? 1 : 0;
  return count;
}

std::unique_ptr<Autoencoder<float>> build_autoencoder(
    const AutoencoderSpec& spec, std::uint64_t seed) {
  return std::make_unique<Autoencoder<float>>(spec, seed);
}

Image reconstruct(const Autoencoder<float>& model, const Image& patch) {
  const auto& size = model.spec().input_size;
  if (patch.width() != size.width || patch.height() != size.height ||
      patch.channels() != 3) {
    throw DimensionError("patch " + std::to_string(patch.width()) + "x" +
                         std::to_string(patch.height()) +
                         " does not match the model input " +
                         std::to_string(size.width) + "x" +
                         std::to_string(size.height));
  }
  return tensor_to_image(model.forward(images_to_tensor<float>({&patch})), 0);
}

namespace {

template <typename From, typename To>
void copy_named(std::vector<nn::NamedParam<From>> from,
                std::vector<nn::NamedParam<To>> to) {
  if (from.size() != to.size()) {
    throw CheckpointError("parameter count mismatch");
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i].name != to[i].name ||
        from[i].param->value.shape() != to[i].param->value.shape()) {
      throw CheckpointError("parameter mismatch at " + from[i].name);
    }
    to[i].param->value = from[i].param->value.template cast<To>();
  }
}

}  // namespace

template <typename From, typename To>
void copy_parameters(Autoencoder<From>& from, Autoencoder<To>& to) {
  if (!(from.spec() == to.spec())) {
    throw CheckpointError("copy_parameters: spec mismatch");
  }
  copy_named(from.parameters(), to.parameters());
}

// ------------------------------------------------------------ classifier

void ClassifierSpec::validate() const {
  if (labels.size() < 2) throw ConfigError("a classifier needs at least 2 classes");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw ConfigError("empty class label");
    for (std::size_t k = 0; k < i; ++k) {
      if (labels[k] == labels[i]) throw ConfigError("duplicate label " + labels[i]);
    }
  }
  if (input_size < 8 || input_size % 4 != 0) {
    throw ConfigError("classifier input size must be a multiple of 4, at least 8");
  }
  if (width < 1) throw ConfigError("classifier width must be positive");
}

namespace {

template <typename T>
LayerPtr<T> residual_unit(int ch, Rng& rng) {
  auto body = std::make_unique<nn::Sequential<T>>();
  body->add(std::make_unique<nn::Conv2d<T>>(ch, ch, 3, false, rng));
  body->add(std::make_unique<nn::BatchNorm2d<T>>(ch));
  body->add(std::make_unique<nn::ReLU<T>>());
  body->add(std::make_unique<nn::Conv2d<T>>(ch, ch, 3, false, rng));
  body->add(std::make_unique<nn::BatchNorm2d<T>>(ch));
  return std::make_unique<nn::Residual<T>>(std::move(body));
}

}  // namespace

template <typename T>
Classifier<T>::Classifier(const ClassifierSpec& spec, std::uint64_t seed)
    : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  const int w = spec_.width;
  net_.add(std::make_unique<nn::Conv2d<T>>(3, w, 3, false, rng));
  net_.add(std::make_unique<nn::BatchNorm2d<T>>(w));
  net_.add(std::make_unique<nn::ReLU<T>>());
  net_.add(residual_unit<T>(w, rng));
  net_.add(std::make_unique<nn::ReLU<T>>());
  net_.add(std::make_unique<nn::MaxPool2<T>>());
  net_.add(std::make_unique<nn::Conv2d<T>>(w, 2 * w, 3, false, rng));
  net_.add(std::make_unique<nn::BatchNorm2d<T>>(2 * w));
  net_.add(std::make_unique<nn::ReLU<T>>());
  net_.add(residual_unit<T>(2 * w, rng));
  net_.add(std::make_unique<nn::ReLU<T>>());
  net_.add(std::make_unique<nn::MaxPool2<T>>());
  net_.add(std::make_unique<nn::GlobalAvgPool<T>>());
  net_.add(std::make_unique<nn::Linear<T>>(2 * w, spec_.n_classes(), rng, T(0.01)));
}

template <typename T>
Tensor<T> Classifier<T>::forward(const Tensor<T>& x) const {
  if (x.c() != 3 || x.h() != spec_.input_size || x.w() != spec_.input_size) {
    throw DimensionError("classifier input shape " + x.shape().str());
  }
  return net_.forward(x);
}

template <typename T>
Tensor<T> Classifier<T>::forward_train(const Tensor<T>& x) {
  if (x.c() != 3 || x.h() != spec_.input_size || x.w() != spec_.input_size) {
    throw DimensionError("classifier input shape " + x.shape().str());
  }
  return net_.forward_train(x);
}

template <typename T>
Tensor<T> Classifier<T>::backward(const Tensor<T>& dy) {
  return net_.backward(dy);
}

template <typename T>
std::vector<nn::NamedParam<T>> Classifier<T>::parameters() {
  std::vector<nn::NamedParam<T>> out;
  net_.collect("net", out);
  return out;
}

template <typename T>
void Classifier<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

std::unique_ptr<Classifier<float>> build_classifier(int n_classes,
                                                    int input_size,
                                                    std::uint64_t seed) {
  if (n_classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  ClassifierSpec spec;
  for (int i = 0; i < n_classes; ++i) spec.labels.push_back("class" + std::to_string(i));
  spec.input_size = input_size;
  return build_classifier(spec, seed);
}

std::unique_ptr<Classifier<float>> build_classifier(const ClassifierSpec& spec,
                                                    std::uint64_t seed) {
  return std::make_unique<Classifier<float>>(spec, seed);
}

template <typename T>
std::vector<std::vector<double>> softmax_rows(const Tensor<T>& logits) {
  const int k = logits.w();
  const std::size_t rows = logits.size() / k;
  std::vector<std::vector<double>> out(rows, std::vector<double>(k));
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.data() + r * k;
    const double m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += out[r][i] = std::exp(z[i] - m);
    for (int i = 0; i < k; ++i) out[r][i] /= sum;
  }
  return out;
}

Image prepare_crop(const Image& crop, int size) {
  if (crop.width() < 1 || crop.height() < 1) throw SizeError("empty crop");
  const double scale = static_cast<double>(size) / std::max(crop.width(), crop.height());
  const int w = std::clamp(static_cast<int>(std::lround(crop.width() * scale)), 1, size);
  const int h = std::clamp(static_cast<int>(std::lround(crop.height() * scale)), 1, size);
  const Image resized = resize_bilinear(crop, w, h);
  Image canvas(size, size, 3, 0.0f);
  const int ox = (size - w) / 2;
  const int oy = (size - h) / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) canvas.at(ox + x, oy + y, c) = resized.at(x, y, c);
    }
  }
  return canvas;
}

ClassPrediction classify(const Classifier<float>& model, const Image& crop) {
  const Image input = prepare_crop(crop, model.spec().input_size);
  const auto probs =
      softmax_rows(model.forward(images_to_tensor<float>({&input})));
  ClassPrediction p;
  p.distribution = probs.front();
  p.index = static_cast<int>(std::max_element(p.distribution.begin(),
                                              p.distribution.end()) -
                             p.distribution.begin());
  p.score = p.distribution[p.index];
  p.label = model.spec().labels[p.index];
  return p;
}

// ----------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'F', 'O', 'D', 'L', 'O', 'C', '\0', '\1'};
enum class CheckpointKind : std::uint32_t { kAutoencoder = 1, kClassifier = 2 };

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V get(std::istream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

void write_checkpoint(const std::filesystem::path& path, CheckpointKind kind,
                      const std::string& header,
                      const std::vector<nn::NamedParam<float>>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kind));
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& s = p.param->value.shape();
    for (int v : {s.n, s.c, s.h, s.w}) put<std::int32_t>(out, v);
    out.write(reinterpret_cast<const char*>(p.param->value.data()),
              static_cast<std::streamsize>(p.param->value.size() * sizeof(float)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

struct RawTensor {
  nn::Shape shape;
  std::vector<float> data;
};

struct RawCheckpoint {
  std::string header;
  std::map<std::string, RawTensor> tensors;
  std::vector<std::string> order;
};

RawCheckpoint read_checkpoint(const std::filesystem::path& path,
                              CheckpointKind expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + " is not a fodloc checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto kind = get<std::uint32_t>(in);
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw CheckpointError("checkpoint holds a different model kind");
  }
  RawCheckpoint ck;
  const auto header_len = get<std::uint64_t>(in);
  if (header_len > (1u << 20)) throw CheckpointError("corrupt checkpoint header");
  ck.header.resize(header_len);
  in.read(ck.header.data(), static_cast<std::streamsize>(header_len));
  const auto count = get<std::uint64_t>(in);
  if (count > (1u << 20)) throw CheckpointError("corrupt tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw CheckpointError("corrupt tensor name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    RawTensor t;
    t.shape = {get<std::int32_t>(in), get<std::int32_t>(in), get<std::int32_t>(in),
               get<std::int32_t>(in)};
    if (t.shape.n < 0 || t.shape.c < 0 || t.shape.h < 0 || t.shape.w < 0 ||
        t.shape.size() > (std::size_t{1} << 31)) {
      throw CheckpointError("corrupt tensor shape for " + name);
    }
    t.data.resize(t.shape.size());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw CheckpointError("truncated tensor " + name);
    ck.order.push_back(name);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void restore(RawCheckpoint& ck, std::vector<nn::NamedParam<float>> params) {
  if (params.size() != ck.tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ck.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = ck.tensors.find(p.name);
    if (it == ck.tensors.end()) throw CheckpointError("missing tensor " + p.name);
    if (it->second.shape != p.param->value.shape()) {
      throw CheckpointError("shape mismatch for " + p.name);
    }
    std::copy(it->second.data.begin(), it->second.data.end(), p.param->value.data());
  }
}

}  // namespace

void save_checkpoint(Autoencoder<float>& model, const std::filesystem::path& path) {
  write_checkpoint(path, CheckpointKind::kAutoencoder, spec_to_json(model.spec()),
                   model.parameters());
}

void save_checkpoint(Classifier<float>& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["labels"] = model.spec().labels;
  j["input_size"] = model.spec().input_size;
  j["width"] = model.spec().width;
  write_checkpoint(path, CheckpointKind::kClassifier, j.dump(), model.parameters());
}

std::unique_ptr<Autoencoder<float>> load_autoencoder(
    const std::filesystem::path& path) {
  RawCheckpoint ck = read_checkpoint(path, CheckpointKind::kAutoencoder);
  AutoencoderSpec spec;
  try {
    spec = spec_from_json(ck.header);
    spec.validate();
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid embedded spec: ") + e.what());
  }
  auto model = build_autoencoder(spec, 0);
  restore(ck, model->parameters());
  return model;
}

std::unique_ptr<Autoencoder<float>> load_autoencoder(
    const std::filesystem::path& path, const AutoencoderSpec& expected) {
  auto model = load_autoencoder(path);
  if (!(model->spec() == expected)) {
    throw CheckpointError("checkpoint spec " + spec_to_json(model->spec()) +
                          " differs from the requested " + spec_to_json(expected));
  }
  return model;
}

std::unique_ptr<Classifier<float>> load_classifier(
    const std::filesystem::path& path) {
  RawCheckpoint ck = read_checkpoint(path, CheckpointKind::kClassifier);
  ClassifierSpec spec;
  try {
    const auto j = nlohmann::json::parse(ck.header);
    spec.labels = j.at("labels").get<std::vector<std::string>>();
    spec.input_size = j.at("input_size").get<int>();
    spec.width = j.at("width").get<int>();
    spec.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid classifier header: ") + e.what());
  }
  auto model = build_classifier(spec, 0);
  restore(ck, model->parameters());
  return model;
}

template class Autoencoder<float>;
template class Autoencoder<double>;
template class Classifier<float>;
template class Classifier<double>;
template Tensor<float> images_to_tensor<float>(const std::vector<const Image*>&);
template Tensor<double> images_to_tensor<double>(const std::vector<const Image*>&);
template Image tensor_to_image<float>(const Tensor<float>&, int);
template Image tensor_to_image<double>(const Tensor<double>&, int);
template std::vector<std::vector<double>> softmax_rows<float>(const Tensor<float>&);
template std::vector<std::vector<double>> softmax_rows<double>(const Tensor<double>&);
template void copy_parameters<float, double>(Autoencoder<float>&, Autoencoder<double>&);
template void copy_parameters<double, float>(Autoencoder<double>&, Autoencoder<float>&);
template void copy_parameters<float, float>(Autoencoder<float>&, Autoencoder<float>&);

}  // namespace fodloc
