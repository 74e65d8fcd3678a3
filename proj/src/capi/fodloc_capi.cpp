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

#include "fodloc/fodloc.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "core/csv.hpp"
#include "core/data.hpp"
#include "core/eval.hpp"
#include "core/pipeline.hpp"
#include "core/training.hpp"

struct fodloc_autoencoder {
  std::unique_ptr<fodloc::Autoencoder<float>> model;
};

struct fodloc_classifier {
  std::unique_ptr<fodloc::Classifier<float>> model;
};

struct fodloc_image {
  fodloc::Image image;
};

namespace {

thread_local std::string g_last_error;

class NullArgument : public fodloc::InvalidArgument {
 public:
  explicit NullArgument(const char* name)
      : fodloc::InvalidArgument(std::string(name) + " must not be NULL") {}
};

template <typename P>
void require(P* p, const char* name) {
  if (p == nullptr) throw NullArgument(name);
}

template <typename F>
fodloc_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return FODLOC_OK;
  } catch (const fodloc::Error& e) {
    g_last_error = e.what();
    return static_cast<fodloc_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return FODLOC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FODLOC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FODLOC_ERR_INTERNAL;
  }
}

std::vector<fodloc::ObjectShape> parse_shapes(const char* text) {
  std::vector<fodloc::ObjectShape> out;
  std::istringstream in(text ? text : "");
  std::string item;
  while (std::getline(in, item, ',')) {
    item = fodloc::csv::trim(item);
    if (!item.empty()) out.push_back(fodloc::parse_shape(item));
  }
  return out;
}

fodloc::SyntheticSceneConfig to_core(const fodloc_scene_config& c) {
  fodloc::SyntheticSceneConfig s;
  s.seed = c.seed;
  s.patch_size = {c.patch_width, c.patch_height};
  s.base_gray_min = c.base_gray_min;
  s.base_gray_max = c.base_gray_max;
  s.tint = c.tint;
  s.gradient_amplitude = c.gradient_amplitude;
  s.noise_amplitude = c.noise_amplitude;
  s.noise_components = c.noise_components;
  s.noise_min_wavelength = c.noise_min_wavelength;
  s.noise_max_wavelength = c.noise_max_wavelength;
  s.grain_amplitude = c.grain_amplitude;
  s.marking_probability = c.marking_probability;
  s.marking_width_min = c.marking_width_min;
  s.marking_width_max = c.marking_width_max;
  s.crack_probability = c.crack_probability;
  s.object_count_min = c.object_count_min;
  s.object_count_max = c.object_count_max;
  s.object_size_min = c.object_size_min;
  s.object_size_max = c.object_size_max;
  s.shapes = parse_shapes(std::string(c.shapes, strnlen(c.shapes, sizeof c.shapes)).c_str());
  s.color_min = c.color_min;
  s.color_max = c.color_max;
  s.min_contrast = c.min_contrast;
  s.fraction_clean = c.fraction_clean;
  s.validate();
  return s;
}

fodloc::AutoencoderSpec to_core(const fodloc_autoencoder_spec& c) {
  fodloc::AutoencoderSpec s;
  s.depth = c.depth;
  switch (c.vit_placement) {
    case FODLOC_VIT_NONE: s.vit_placement = fodloc::VitPlacement::kNone; break;
    case FODLOC_VIT_OUTER: s.vit_placement = fodloc::VitPlacement::kOuter; break;
    case FODLOC_VIT_INNER: s.vit_placement = fodloc::VitPlacement::kInner; break;
    case FODLOC_VIT_LATENT: s.vit_placement = fodloc::VitPlacement::kLatent; break;
    default: throw fodloc::ConfigError("invalid ViT placement value");
  }
  s.skip_connections = c.skip_connections != 0;
  s.base_channels = c.base_channels;
  s.input_size = {c.input_width, c.input_height};
  s.vit.token_patch = c.vit_token_patch;
  s.vit.embed_dim = c.vit_embed_dim;
  s.vit.heads = c.vit_heads;
  s.vit.transformer_depth = c.vit_transformer_depth;
  s.vit.mlp_ratio = c.vit_mlp_ratio;
  s.vit_encoder_only = c.vit_encoder_only != 0;
  return s;
}

fodloc_autoencoder_spec from_core(const fodloc::AutoencoderSpec& s) {
  fodloc_autoencoder_spec c{};
  c.depth = s.depth;
  c.vit_placement = static_cast<fodloc_vit_placement>(static_cast<int>(s.vit_placement));
  c.skip_connections = s.skip_connections ? 1 : 0;
  c.base_channels = s.base_channels;
  c.input_width = s.input_size.width;
  c.input_height = s.input_size.height;
  c.vit_token_patch = s.vit.token_patch;
  c.vit_embed_dim = s.vit.embed_dim;
  c.vit_heads = s.vit.heads;
  c.vit_transformer_depth = s.vit.transformer_depth;
  c.vit_mlp_ratio = s.vit.mlp_ratio;
  c.vit_encoder_only = s.vit_encoder_only ? 1 : 0;
  return c;
}

fodloc::TrainConfig to_core(const fodloc_train_config& c) {
  fodloc::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  switch (c.optimizer) {
    case FODLOC_OPTIMIZER_ADAM: t.optimizer = fodloc::OptimizerKind::kAdam; break;
    case FODLOC_OPTIMIZER_SGD: t.optimizer = fodloc::OptimizerKind::kSgd; break;
    default: throw fodloc::ConfigError("invalid optimizer value");
  }
  t.seed = c.seed;
  t.validation_fraction = c.validation_fraction;
  t.momentum = c.momentum;
  t.validate();
  return t;
}

fodloc::LocalizeOptions to_core(const fodloc_localize_config& c) {
  fodloc::LocalizeOptions o;
  switch (c.difference) {
    case FODLOC_DIFFERENCE_ABSOLUTE: o.difference = fodloc::DifferenceKind::kAbsolute; break;
    case FODLOC_DIFFERENCE_SSIM: o.difference = fodloc::DifferenceKind::kSsim; break;
    default: throw fodloc::ConfigError("invalid difference method value");
  }
  o.ssim_window = c.ssim_window;
  o.min_area = c.min_area;
  return o;
}

std::vector<fodloc::Image> load_split(const fodloc::DatasetManifest& m,
                                      fodloc::Split split,
                                      std::vector<std::string>* ids = nullptr) {
  std::vector<fodloc::Image> out;
  for (const auto& e : m.entries) {
    if (e.split != split) continue;
    out.push_back(fodloc::read_rgb(m.root / e.path));
    if (out.back().width() != e.size.width || out.back().height() != e.size.height) {
      throw fodloc::DataError(e.path + " does not match its manifest size");
    }
    if (ids) ids->push_back(std::filesystem::path(e.path).stem().string());
  }
  return out;
}

fodloc::EpochCallback wrap(fodloc_epoch_callback cb, void* user) {
  if (cb == nullptr) return {};
  return [cb, user](int e, double t, double v) { cb(e, t, v, user); };
}

}  // namespace

extern "C" {

const char* fodloc_version(void) { return "1.0.0"; }

const char* fodloc_last_error(void) { return g_last_error.c_str(); }

const char* fodloc_status_name(fodloc_status status) {
  switch (status) {
    case FODLOC_OK: return "ok";
    case FODLOC_ERR_IO: return "io error";
    case FODLOC_ERR_FORMAT: return "format error";
    case FODLOC_ERR_SIZE: return "size error";
    case FODLOC_ERR_PARSE: return "parse error";
    case FODLOC_ERR_VALIDATION: return "validation error";
    case FODLOC_ERR_DIMENSION: return "dimension error";
    case FODLOC_ERR_CONFIG: return "config error";
    case FODLOC_ERR_CHECKPOINT: return "checkpoint error";
    case FODLOC_ERR_DATA: return "data error";
    case FODLOC_ERR_NUMERIC: return "numeric error";
    case FODLOC_ERR_BOUNDS: return "bounds error";
    case FODLOC_ERR_COMPLETENESS: return "completeness error";
    case FODLOC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FODLOC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ------------------------------------------------------------------- data

void fodloc_scene_config_default(fodloc_scene_config* config) {
  if (config == nullptr) return;
  const fodloc::SyntheticSceneConfig s;
  *config = fodloc_scene_config{};
  config->seed = s.seed;
  config->patch_width = s.patch_size.width;
  config->patch_height = s.patch_size.height;
  config->base_gray_min = s.base_gray_min;
  config->base_gray_max = s.base_gray_max;
  config->tint = s.tint;
  config->gradient_amplitude = s.gradient_amplitude;
  config->noise_amplitude = s.noise_amplitude;
  config->noise_components = s.noise_components;
  config->noise_min_wavelength = s.noise_min_wavelength;
  config->noise_max_wavelength = s.noise_max_wavelength;
  config->grain_amplitude = s.grain_amplitude;
  config->marking_probability = s.marking_probability;
  config->marking_width_min = s.marking_width_min;
  config->marking_width_max = s.marking_width_max;
  config->crack_probability = s.crack_probability;
  config->object_count_min = s.object_count_min;
  config->object_count_max = s.object_count_max;
  config->object_size_min = s.object_size_min;
  config->object_size_max = s.object_size_max;
  std::string shapes;
  for (auto sh : s.shapes) shapes += (shapes.empty() ? "" : ",") + fodloc::to_string(sh);
  std::snprintf(config->shapes, sizeof config->shapes, "%s", shapes.c_str());
  config->color_min = s.color_min;
  config->color_max = s.color_max;
  config->min_contrast = s.min_contrast;
  config->fraction_clean = s.fraction_clean;
}

fodloc_status fodloc_build_dataset(const fodloc_scene_config* config,
                                   size_t n_train_clean, size_t n_test,
                                   const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    fodloc::build_dataset(to_core(*config), n_train_clean, n_test, out_dir);
  });
}

fodloc_status fodloc_build_crop_dataset(const fodloc_scene_config* config,
                                        const char* shapes, size_t count,
                                        const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(shapes, "shapes");
    require(out_dir, "out_dir");
    fodloc::build_crop_dataset(to_core(*config), parse_shapes(shapes), count, out_dir);
  });
}

// ------------------------------------------------------------------ model

void fodloc_autoencoder_spec_default(fodloc_autoencoder_spec* spec) {
  if (spec != nullptr) *spec = from_core(fodloc::AutoencoderSpec{});
}

fodloc_status fodloc_autoencoder_spec_parse(const char* text,
                                            fodloc_autoencoder_spec* spec) {
  return guarded([&] {
    require(text, "text");
    require(spec, "spec");
    const auto parsed = fodloc::parse_autoencoder_spec(text, to_core(*spec));
    parsed.validate();
    *spec = from_core(parsed);
  });
}

fodloc_status fodloc_autoencoder_spec_name(const fodloc_autoencoder_spec* spec,
                                           char* buffer, size_t size) {
  return guarded([&] {
    require(spec, "spec");
    require(buffer, "buffer");
    const std::string name = to_core(*spec).name();
    if (size <= name.size()) {
      throw fodloc::InvalidArgument("name needs a buffer of " +
                                    std::to_string(name.size() + 1) + " bytes");
    }
    std::snprintf(buffer, size, "%s", name.c_str());
  });
}

fodloc_status fodloc_autoencoder_create(const fodloc_autoencoder_spec* spec,
                                        uint64_t seed, fodloc_autoencoder** out) {
  return guarded([&] {
    require(spec, "spec");
    require(out, "out");
    *out = new fodloc_autoencoder{fodloc::build_autoencoder(to_core(*spec), seed)};
  });
}

fodloc_status fodloc_autoencoder_load(const char* path, fodloc_autoencoder** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new fodloc_autoencoder{fodloc::load_autoencoder(path)};
  });
}

fodloc_status fodloc_autoencoder_save(fodloc_autoencoder* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    fodloc::save_checkpoint(*model->model, path);
  });
}

fodloc_status fodloc_autoencoder_get_spec(const fodloc_autoencoder* model,
                                          fodloc_autoencoder_spec* spec) {
  return guarded([&] {
    require(model, "model");
    require(spec, "spec");
    *spec = from_core(model->model->spec());
  });
}

void fodloc_autoencoder_free(fodloc_autoencoder* model) { delete model; }

fodloc_status fodloc_classifier_load(const char* path, fodloc_classifier** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new fodloc_classifier{fodloc::load_classifier(path)};
  });
}

fodloc_status fodloc_classifier_save(fodloc_classifier* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    fodloc::save_checkpoint(*model->model, path);
  });
}

int fodloc_classifier_class_count(const fodloc_classifier* model) {
  return model ? model->model->n_classes() : 0;
}

const char* fodloc_classifier_label(const fodloc_classifier* model, int index) {
  if (model == nullptr || index < 0 || index >= model->model->n_classes()) return nullptr;
  return model->model->spec().labels[index].c_str();
}

void fodloc_classifier_free(fodloc_classifier* model) { delete model; }

// --------------------------------------------------------------- training

void fodloc_train_config_default(fodloc_train_config* config) {
  if (config == nullptr) return;
  const fodloc::TrainConfig t;
  config->epochs = t.epochs;
  config->batch_size = t.batch_size;
  config->learning_rate = t.learning_rate;
  config->optimizer = FODLOC_OPTIMIZER_ADAM;
  config->seed = t.seed;
  config->validation_fraction = t.validation_fraction;
  config->momentum = t.momentum;
}

fodloc_status fodloc_autoencoder_train(const char* manifest_path,
                                       const fodloc_autoencoder_spec* spec,
                                       const fodloc_train_config* config,
                                       const char* metrics_csv,
                                       fodloc_epoch_callback callback, void* user,
                                       fodloc_autoencoder** out) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(spec, "spec");
    require(config, "config");
    require(out, "out");
    const auto core_spec = to_core(*spec);
    core_spec.validate();
    const auto cfg = to_core(*config);
    const auto manifest = fodloc::load_manifest(manifest_path);
    const auto images = load_split(manifest, fodloc::Split::kTrain);
    auto run = fodloc::train_autoencoder(images, core_spec, cfg, wrap(callback, user));
    if (metrics_csv) fodloc::write_history_csv(run.history, metrics_csv);
    *out = new fodloc_autoencoder{std::move(run.model)};
  });
}

fodloc_status fodloc_classifier_train(const char* crops_dir,
                                      const fodloc_train_config* config,
                                      int input_size, const char* metrics_csv,
                                      fodloc_epoch_callback callback, void* user,
                                      fodloc_classifier** out) {
  return guarded([&] {
    require(crops_dir, "crops_dir");
    require(config, "config");
    require(out, "out");
    const auto cfg = to_core(*config);
    const auto crops = fodloc::load_crop_dataset(crops_dir);
    auto run = fodloc::train_classifier(crops, cfg, input_size, wrap(callback, user));
    if (metrics_csv) fodloc::write_history_csv(run.history, metrics_csv);
    *out = new fodloc_classifier{std::move(run.model)};
  });
}

// --------------------------------------------------------------- pipeline

void fodloc_localize_config_default(fodloc_localize_config* config) {
  if (config == nullptr) return;
  const fodloc::LocalizeOptions o;
  const fodloc::UnknownPolicy p;
  config->difference = FODLOC_DIFFERENCE_ABSOLUTE;
  config->ssim_window = o.ssim_window;
  config->min_area = o.min_area;
  config->jobs = 1;
  config->unknown_threshold = p.score_threshold;
  config->unknown_dir = nullptr;
}

fodloc_status fodloc_localize_images(const fodloc_autoencoder* model,
                                     const char* const* image_paths, size_t count,
                                     const fodloc_localize_config* config,
                                     const fodloc_classifier* classifier,
                                     const char* out_dir,
                                     fodloc_localize_summary* summary) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    require(out_dir, "out_dir");
    if (count > 0) require(image_paths, "image_paths");
    const auto options = to_core(*config);
    fodloc::UnknownPolicy policy;
    policy.score_threshold = config->unknown_threshold;
    if (config->unknown_dir) policy.save_dir = config->unknown_dir;
    policy.validate();
    const auto& spec = model->model->spec().input_size;
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    fodloc_localize_summary s{};
    std::vector<fodloc::Detection> all;
    for (size_t i = 0; i < count; ++i) {
      require(image_paths[i], "image path");
      const fodloc::Frame frame =
          fodloc::resize_to_grid(fodloc::load_frame(image_paths[i]), spec);
      auto result = fodloc::localize_frame(*model->model, frame, spec, options,
                                           std::max(1, config->jobs));
      fodloc::write_mask_png(result.mask.mask, result.mask.width, result.mask.height,
                             out / (frame.source_id + "_mask.png"));
      if (classifier) {
        std::vector<std::string> warnings;
        result.detections = fodloc::classify_detections(
            *classifier->model, frame.image, std::move(result.detections), policy,
            &warnings);
        s.warnings += warnings.size();
      }
      for (auto& d : result.detections) {
        if (d.label && *d.label == fodloc::kUnknownLabel) ++s.unknown;
        // Report boxes in the coordinates of their own patch.
        const int col = d.box.x_min / spec.width;
        const int row = d.box.y_min / spec.height;
        d.box = d.box.translated(-col * spec.width, -row * spec.height);
        all.push_back(std::move(d));
      }
      ++s.images;
      s.patches += static_cast<size_t>(result.rows) * result.cols;
    }
    s.detections = all.size();
    fodloc::write_detections_csv(all, out / "detections.csv");
    if (summary) *summary = s;
  });
}

fodloc_status fodloc_classify_crops(const fodloc_classifier* model,
                                    const char* const* image_paths, size_t count,
                                    double unknown_threshold,
                                    const char* unknown_dir, const char* out_csv) {
  return guarded([&] {
    require(model, "model");
    require(out_csv, "out_csv");
    if (count > 0) require(image_paths, "image_paths");
    fodloc::UnknownPolicy policy;
    policy.score_threshold = unknown_threshold;
    policy.validate();
    std::ofstream out(out_csv);
    if (!out) throw fodloc::IoError(std::string("cannot write ") + out_csv);
    out << "path,label,score\n" << std::setprecision(9);
    for (size_t i = 0; i < count; ++i) {
      require(image_paths[i], "image path");
      const fodloc::Image img = fodloc::read_rgb(image_paths[i]);
      const auto p = fodloc::classify(*model->model, img);
      const bool unknown = !policy.accepts(p.score);
      if (unknown && unknown_dir) {
        std::filesystem::create_directories(unknown_dir);
        fodloc::write_rgb_png(img, std::filesystem::path(unknown_dir) /
                                       std::filesystem::path(image_paths[i]).filename());
      }
      out << image_paths[i] << ',' << (unknown ? fodloc::kUnknownLabel : p.label)
          << ',' << p.score << '\n';
    }
    if (!out) throw fodloc::IoError(std::string("write failed: ") + out_csv);
  });
}

fodloc_status fodloc_image_load(const char* path, fodloc_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new fodloc_image{fodloc::read_rgb(path)};
  });
}

int fodloc_image_width(const fodloc_image* image) {
  return image ? image->image.width() : 0;
}

int fodloc_image_height(const fodloc_image* image) {
  return image ? image->image.height() : 0;
}

void fodloc_image_free(fodloc_image* image) { delete image; }

fodloc_status fodloc_localize_patch(const fodloc_autoencoder* model,
                                    const fodloc_image* patch,
                                    const fodloc_localize_config* config,
                                    int* found, int box[4],
                                    double* mean_difference, int* degenerate) {
  return guarded([&] {
    require(model, "model");
    require(patch, "patch");
    require(config, "config");
    require(found, "found");
    require(box, "box");
    const auto a = fodloc::analyze_patch(*model->model, patch->image, "patch",
                                         to_core(*config));
    *found = a.detection ? 1 : 0;
    if (degenerate) *degenerate = a.threshold ? 0 : 1;
    if (a.detection) {
      box[0] = a.detection->box.x_min;
      box[1] = a.detection->box.y_min;
      box[2] = a.detection->box.x_max;
      box[3] = a.detection->box.y_max;
      if (mean_difference) *mean_difference = a.detection->mean_difference;
    } else if (mean_difference) {
      *mean_difference = 0.0;
    }
  });
}

// ------------------------------------------------------------- evaluation

fodloc_status fodloc_iou(const int a[4], const int b[4], double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    const fodloc::BoundingBox ba{a[0], a[1], a[2], a[3]};
    const fodloc::BoundingBox bb{b[0], b[1], b[2], b[3]};
    if (!ba.valid() || !bb.valid()) throw fodloc::ValidationError("empty or inverted box");
    *out = fodloc::iou(ba, bb);
  });
}

fodloc_status fodloc_detection_rate(size_t n_correct, size_t n_ground_truth,
                                    double* out) {
  return guarded([&] {
    require(out, "out");
    if (n_correct > n_ground_truth) {
      throw fodloc::InvalidArgument("more correct localizations than ground truths");
    }
    *out = fodloc::detection_rate(n_correct, n_ground_truth);
  });
}

fodloc_status fodloc_evaluate(const char* detections_csv,
                              const char* annotations_csv, int patch_width,
                              int patch_height, double iou_threshold,
                              const char* report_csv,
                              fodloc_eval_summary* summary) {
  return guarded([&] {
    require(detections_csv, "detections_csv");
    require(annotations_csv, "annotations_csv");
    if (!(iou_threshold >= 0.0 && iou_threshold < 1.0)) {
      throw fodloc::InvalidArgument("IoU threshold must lie in [0, 1)");
    }
    const auto dets = fodloc::read_detections_csv(detections_csv);
    const auto gts = fodloc::load_annotations(annotations_csv, {patch_width, patch_height});
    const auto report = fodloc::evaluate(dets, gts, iou_threshold);
    if (report_csv) fodloc::write_eval_report_csv(report, report_csv);
    if (summary) {
      summary->iou_threshold = report.iou_threshold;
      summary->n_ground_truth = report.n_ground_truth;
      summary->n_correct = report.n_correct;
      summary->n_false_positive = report.n_false_positive;
      summary->detection_rate = report.detection_rate;
      summary->empty = report.empty ? 1 : 0;
    }
  });
}

fodloc_status fodloc_sweep(const char* detections_csv, const char* annotations_csv,
                           int patch_width, int patch_height,
                           const double* thresholds, size_t count,
                           const char* out_csv, double* rates) {
  return guarded([&] {
    require(detections_csv, "detections_csv");
    require(annotations_csv, "annotations_csv");
    if (count > 0) require(thresholds, "thresholds");
    const auto dets = fodloc::read_detections_csv(detections_csv);
    const auto gts = fodloc::load_annotations(annotations_csv, {patch_width, patch_height});
    const auto curve = fodloc::threshold_sweep(
        dets, gts, std::vector<double>(thresholds, thresholds + count));
    if (out_csv) fodloc::write_sweep_csv(curve, out_csv);
    if (rates) {
      for (size_t i = 0; i < curve.size(); ++i) rates[i] = curve[i].detection_rate;
    }
  });
}

void fodloc_ablation_config_default(fodloc_ablation_config* config) {
  if (config == nullptr) return;
  fodloc_train_config_default(&config->train);
  fodloc_localize_config_default(&config->localize);
  const fodloc::AblationConfig a;
  config->iou_threshold = a.iou_threshold;
  config->weak_delta = a.weak_delta;
  config->clean_holdout_fraction = 0.1;
}

fodloc_status fodloc_ablate(const char* manifest_path,
                            const fodloc_autoencoder_spec* specs, size_t count,
                            const fodloc_ablation_config* config,
                            const char* out_csv, fodloc_row_callback callback,
                            void* user) {
  return guarded([&] {
    require(manifest_path, "manifest_path");
    require(config, "config");
    require(out_csv, "out_csv");
    if (count > 0) require(specs, "specs");
    if (!(config->clean_holdout_fraction >= 0 && config->clean_holdout_fraction < 1)) {
      throw fodloc::ConfigError("clean_holdout_fraction must lie in [0, 1)");
    }
    fodloc::AblationConfig cfg;
    cfg.train = to_core(config->train);
    cfg.localize = to_core(config->localize);
    cfg.iou_threshold = config->iou_threshold;
    cfg.weak_delta = config->weak_delta;
    std::vector<fodloc::AutoencoderSpec> core_specs;
    for (size_t i = 0; i < count; ++i) core_specs.push_back(to_core(specs[i]));

    std::vector<fodloc::AblationRow> rows;
    if (!core_specs.empty()) {
      const auto manifest = fodloc::load_manifest(manifest_path);
      fodloc::AblationData data;
      data.train_clean = load_split(manifest, fodloc::Split::kTrain);
      const auto holdout = static_cast<std::size_t>(
          config->clean_holdout_fraction * static_cast<double>(data.train_clean.size()));
      for (std::size_t i = data.train_clean.size() - holdout; i < data.train_clean.size(); ++i) {
        data.clean_test.push_back(std::move(data.train_clean[i]));
      }
      data.train_clean.resize(data.train_clean.size() - holdout);
      std::vector<std::string> ids;
      auto test = load_split(manifest, fodloc::Split::kTest, &ids);
      const auto& size = manifest.entries.empty() ? fodloc::PatchSpec{}
                                                  : manifest.entries.front().size;
      data.fod_truths = fodloc::load_annotations(manifest.root / manifest.annotations, size);
      for (std::size_t i = 0; i < test.size(); ++i) {
        const bool has_truth =
            std::any_of(data.fod_truths.begin(), data.fod_truths.end(),
                        [&](const fodloc::GroundTruth& g) { return g.patch_id == ids[i]; });
        if (has_truth) {
          data.fod_test.push_back(std::move(test[i]));
          data.fod_ids.push_back(ids[i]);
        } else {
          data.clean_test.push_back(std::move(test[i]));
        }
      }
      rows = fodloc::run_ablation(core_specs, data, cfg, [&](const fodloc::AblationRow& r) {
        if (callback) callback(r.name.c_str(), r.display().c_str(), user);
      });
    }
    fodloc::write_ablation_csv(rows, out_csv);
  });
}

}  // extern "C"
