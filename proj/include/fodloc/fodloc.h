/* Copyright 2026 The fodloc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the fodloc library.
 *
 * Every function returns a fodloc_status. On failure the message of the most
 * recent error on the calling thread is available from fodloc_last_error().
 * Objects are opaque handles released with their *_free function; passing
 * NULL to a free function is a no-op. Paths are UTF-8.
 */

#ifndef FODLOC_FODLOC_H_
#define FODLOC_FODLOC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FODLOC_API __declspec(dllexport)
#else
#define FODLOC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fodloc_status {
  FODLOC_OK = 0,
  FODLOC_ERR_IO = 1,
  FODLOC_ERR_FORMAT = 2,
  FODLOC_ERR_SIZE = 3,
  FODLOC_ERR_PARSE = 4,
  FODLOC_ERR_VALIDATION = 5,
  FODLOC_ERR_DIMENSION = 6,
  FODLOC_ERR_CONFIG = 7,
  FODLOC_ERR_CHECKPOINT = 8,
  FODLOC_ERR_DATA = 9,
  FODLOC_ERR_NUMERIC = 10,
  FODLOC_ERR_BOUNDS = 11,
  FODLOC_ERR_COMPLETENESS = 12,
  FODLOC_ERR_INVALID_ARGUMENT = 13,
  FODLOC_ERR_INTERNAL = 99
} fodloc_status;

FODLOC_API const char* fodloc_version(void);
/* Message of the last failure on this thread; "" when none. */
FODLOC_API const char* fodloc_last_error(void);
FODLOC_API const char* fodloc_status_name(fodloc_status status);

/* ------------------------------------------------------------------ data */

typedef struct fodloc_scene_config {
  uint64_t seed;
  int patch_width;
  int patch_height;
  double base_gray_min;
  double base_gray_max;
  double tint;
  double gradient_amplitude;
  double noise_amplitude;
  int noise_components;
  double noise_min_wavelength;
  double noise_max_wavelength;
  double grain_amplitude;
  double marking_probability;
  double marking_width_min;
  double marking_width_max;
  double crack_probability;
  int object_count_min;
  int object_count_max;
  int object_size_min;
  int object_size_max;
  /* Comma-separated subset of disk,rectangle,triangle,bar. */
  char shapes[128];
  double color_min;
  double color_max;
  double min_contrast;
  double fraction_clean;
} fodloc_scene_config;

FODLOC_API void fodloc_scene_config_default(fodloc_scene_config* config);

/* Writes train/ (clean), test/, annotations.csv and manifest.csv. */
FODLOC_API fodloc_status fodloc_build_dataset(const fodloc_scene_config* config,
                                              size_t n_train_clean,
                                              size_t n_test,
                                              const char* out_dir);

/* Writes crops/ and crops/labels.csv; `shapes` as in fodloc_scene_config. */
FODLOC_API fodloc_status fodloc_build_crop_dataset(
    const fodloc_scene_config* config, const char* shapes, size_t count,
    const char* out_dir);

/* ----------------------------------------------------------------- model */

typedef enum fodloc_vit_placement {
  FODLOC_VIT_NONE = 0,
  FODLOC_VIT_OUTER = 1,
  FODLOC_VIT_INNER = 2,
  FODLOC_VIT_LATENT = 3
} fodloc_vit_placement;

typedef struct fodloc_autoencoder_spec {
  int depth;
  fodloc_vit_placement vit_placement;
  int skip_connections;
  int base_channels;
  int input_width;
  int input_height;
  int vit_token_patch;
  int vit_embed_dim;
  int vit_heads;
  int vit_transformer_depth;
  int vit_mlp_ratio;
  int vit_encoder_only;
} fodloc_autoencoder_spec;

FODLOC_API void fodloc_autoencoder_spec_default(fodloc_autoencoder_spec* spec);

/* Applies "key=value,..." overrides (depth, vit, skip, base, size,
 * vit_encoder_only, token_patch, embed_dim, heads, transformer_depth,
 * mlp_ratio) and validates the result. */
FODLOC_API fodloc_status fodloc_autoencoder_spec_parse(
    const char* text, fodloc_autoencoder_spec* spec);

/* Short name such as "depth3-outer", NUL-terminated. A buffer too small for
 * the whole name is an invalid argument. */
FODLOC_API fodloc_status fodloc_autoencoder_spec_name(
    const fodloc_autoencoder_spec* spec, char* buffer, size_t size);

typedef struct fodloc_autoencoder fodloc_autoencoder;
typedef struct fodloc_classifier fodloc_classifier;
typedef struct fodloc_image fodloc_image;

FODLOC_API fodloc_status fodloc_autoencoder_create(
    const fodloc_autoencoder_spec* spec, uint64_t seed,
    fodloc_autoencoder** out);
FODLOC_API fodloc_status fodloc_autoencoder_load(const char* path,
                                                 fodloc_autoencoder** out);
FODLOC_API fodloc_status fodloc_autoencoder_save(fodloc_autoencoder* model,
                                                 const char* path);
FODLOC_API fodloc_status fodloc_autoencoder_get_spec(
    const fodloc_autoencoder* model, fodloc_autoencoder_spec* spec);
FODLOC_API void fodloc_autoencoder_free(fodloc_autoencoder* model);

FODLOC_API fodloc_status fodloc_classifier_load(const char* path,
                                                fodloc_classifier** out);
FODLOC_API fodloc_status fodloc_classifier_save(fodloc_classifier* model,
                                                const char* path);
FODLOC_API int fodloc_classifier_class_count(const fodloc_classifier* model);
/* Label of class `index`, or NULL when out of range. */
FODLOC_API const char* fodloc_classifier_label(const fodloc_classifier* model,
                                               int index);
FODLOC_API void fodloc_classifier_free(fodloc_classifier* model);

/* -------------------------------------------------------------- training */

typedef enum fodloc_optimizer {
  FODLOC_OPTIMIZER_ADAM = 0,
  FODLOC_OPTIMIZER_SGD = 1
} fodloc_optimizer;

typedef struct fodloc_train_config {
  int epochs;
  int batch_size;
  double learning_rate;
  fodloc_optimizer optimizer;
  uint64_t seed;
  double validation_fraction;
  double momentum;
} fodloc_train_config;

FODLOC_API void fodloc_train_config_default(fodloc_train_config* config);

typedef void (*fodloc_epoch_callback)(int epoch, double train_loss,
                                      double val_loss, void* user);

/* Trains on the train split of a dataset manifest. `metrics_csv` and
 * `callback` may be NULL. */
FODLOC_API fodloc_status fodloc_autoencoder_train(
    const char* manifest_path, const fodloc_autoencoder_spec* spec,
    const fodloc_train_config* config, const char* metrics_csv,
    fodloc_epoch_callback callback, void* user, fodloc_autoencoder** out);

/* Trains on a crop directory holding labels.csv. */
FODLOC_API fodloc_status fodloc_classifier_train(
    const char* crops_dir, const fodloc_train_config* config, int input_size,
    const char* metrics_csv, fodloc_epoch_callback callback, void* user,
    fodloc_classifier** out);

/* -------------------------------------------------------------- pipeline */

typedef enum fodloc_difference {
  FODLOC_DIFFERENCE_ABSOLUTE = 0,
  FODLOC_DIFFERENCE_SSIM = 1
} fodloc_difference;

typedef struct fodloc_localize_config {
  fodloc_difference difference;
  int ssim_window;
  size_t min_area;
  /* Worker threads per frame; values below 1 mean 1. */
  int jobs;
  /* Classification stage, used when a classifier is passed. */
  double unknown_threshold;
  /* Directory for unknown crops, or NULL. */
  const char* unknown_dir;
} fodloc_localize_config;

FODLOC_API void fodloc_localize_config_default(fodloc_localize_config* config);

typedef struct fodloc_localize_summary {
  size_t images;
  size_t patches;
  size_t detections;
  size_t unknown;
  size_t warnings;
} fodloc_localize_summary;

/* Localizes each image (resized to the model's patch grid) and writes
 * detections.csv plus <stem>_mask.png under out_dir. `classifier` may be
 * NULL. */
FODLOC_API fodloc_status fodloc_localize_images(
    const fodloc_autoencoder* model, const char* const* image_paths,
    size_t count, const fodloc_localize_config* config,
    const fodloc_classifier* classifier, const char* out_dir,
    fodloc_localize_summary* summary);

/* Classifies whole crop images; writes path,label,score rows. */
FODLOC_API fodloc_status fodloc_classify_crops(
    const fodloc_classifier* model, const char* const* image_paths,
    size_t count, double unknown_threshold, const char* unknown_dir,
    const char* out_csv);

FODLOC_API fodloc_status fodloc_image_load(const char* path,
                                           fodloc_image** out);
FODLOC_API int fodloc_image_width(const fodloc_image* image);
FODLOC_API int fodloc_image_height(const fodloc_image* image);
FODLOC_API void fodloc_image_free(fodloc_image* image);

/* Single-patch localization. *found is 0 when nothing was localized;
 * otherwise box holds x_min, y_min, x_max, y_max. *degenerate reports a
 * Degenerate Otsu outcome. */
FODLOC_API fodloc_status fodloc_localize_patch(
    const fodloc_autoencoder* model, const fodloc_image* patch,
    const fodloc_localize_config* config, int* found, int box[4],
    double* mean_difference, int* degenerate);

/* ------------------------------------------------------------ evaluation */

typedef struct fodloc_eval_summary {
  double iou_threshold;
  size_t n_ground_truth;
  size_t n_correct;
  size_t n_false_positive;
  double detection_rate;
  int empty;
} fodloc_eval_summary;

/* Boxes are x_min, y_min, x_max, y_max; an empty box is a validation error. */
FODLOC_API fodloc_status fodloc_iou(const int a[4], const int b[4],
                                    double* out);
FODLOC_API fodloc_status fodloc_detection_rate(size_t n_correct,
                                               size_t n_ground_truth,
                                               double* out);

/* Scores a detection CSV against an annotation CSV whose boxes must fit a
 * patch_width x patch_height patch. `report_csv` may be NULL. */
FODLOC_API fodloc_status fodloc_evaluate(const char* detections_csv,
                                         const char* annotations_csv,
                                         int patch_width, int patch_height,
                                         double iou_threshold,
                                         const char* report_csv,
                                         fodloc_eval_summary* summary);

/* `rates` (may be NULL) receives `count` values. */
FODLOC_API fodloc_status fodloc_sweep(const char* detections_csv,
                                      const char* annotations_csv,
                                      int patch_width, int patch_height,
                                      const double* thresholds, size_t count,
                                      const char* out_csv, double* rates);

typedef struct fodloc_ablation_config {
  fodloc_train_config train;
  fodloc_localize_config localize;
  double iou_threshold;
  double weak_delta;
  /* Fraction of the clean train split held out as clean test patches. */
  double clean_holdout_fraction;
} fodloc_ablation_config;

FODLOC_API void fodloc_ablation_config_default(fodloc_ablation_config* config);

/* Receives one formatted table row per finished spec. */
typedef void (*fodloc_row_callback)(const char* name, const char* result,
                                    void* user);

/* Trains and scores every spec on a dataset manifest; writes the table to
 * out_csv. */
FODLOC_API fodloc_status fodloc_ablate(const char* manifest_path,
                                       const fodloc_autoencoder_spec* specs,
                                       size_t count,
                                       const fodloc_ablation_config* config,
                                       const char* out_csv,
                                       fodloc_row_callback callback,
                                       void* user);

#ifdef __cplusplus
}
#endif

#endif /* FODLOC_FODLOC_H_ */
