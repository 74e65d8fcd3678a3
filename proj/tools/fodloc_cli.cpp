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

// fodloc: command-line front end over the C API.
//
// Results go to files (and, for evaluate/sweep, a summary line on stdout);
// progress and errors go to stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fodloc/fodloc.h"

namespace fs = std::filesystem;

namespace {

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

void check(fodloc_status s, const std::string& what) {
  if (s != FODLOC_OK) {
    throw Failure(static_cast<int>(s), what + ": " + fodloc_status_name(s) + ": " +
                                           fodloc_last_error());
  }
}

struct PatchSize {
  int width = 128;
  int height = 128;
};

// "N" or "WxH".
PatchSize parse_patch(const std::string& s) {
  PatchSize p;
  const auto x = s.find('x');
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      p.width = p.height = std::stoi(s, &used);
      if (used == s.size()) return p;
    } else {
      p.width = std::stoi(s.substr(0, x), &used);
      if (used == x) {
        p.height = std::stoi(s.substr(x + 1), &used);
        if (used == s.size() - x - 1) return p;
      }
    }
  } catch (const std::exception&) {
  }
  throw Failure(FODLOC_ERR_PARSE, "patch size must look like 128 or 128x96, got '" + s + "'");
}

struct Globals {
  std::string run_dir;
  uint64_t seed = 7;
  int jobs = 1;
};

struct TrainFlags {
  fodloc_train_config cfg{};
  std::string optimizer = "adam";
  std::string spec;

  TrainFlags() { fodloc_train_config_default(&cfg); }

  void add(CLI::App* app, bool with_spec) {
    app->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", cfg.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--optimizer", optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    app->add_option("--momentum", cfg.momentum, "SGD momentum")->capture_default_str();
    app->add_option("--val-fraction", cfg.validation_fraction,
                    "Fraction of training data held out for validation")
        ->capture_default_str();
    if (with_spec) {
      app->add_option("--spec", spec,
                      "Autoencoder overrides, e.g. depth=3,vit=outer,skip=false,size=128x128");
    }
  }

  fodloc_train_config resolve(const Globals& g) {
    cfg.optimizer = optimizer == "sgd" ? FODLOC_OPTIMIZER_SGD : FODLOC_OPTIMIZER_ADAM;
    cfg.seed = g.seed;
    return cfg;
  }
};

fodloc_autoencoder_spec parse_spec(const std::string& text) {
  fodloc_autoencoder_spec spec;
  fodloc_autoencoder_spec_default(&spec);
  check(fodloc_autoencoder_spec_parse(text.c_str(), &spec), "invalid --spec");
  return spec;
}

struct LocalizeFlags {
  fodloc_localize_config cfg{};
  std::string difference = "absolute";
  std::string unknown_dir;

  LocalizeFlags() { fodloc_localize_config_default(&cfg); }

  void add(CLI::App* app) {
    app->add_option("--difference", difference, "absolute or ssim")
        ->check(CLI::IsMember({"absolute", "ssim"}))
        ->capture_default_str();
    app->add_option("--ssim-window", cfg.ssim_window, "Odd SSIM window size")
        ->capture_default_str();
    app->add_option("--min-area", cfg.min_area,
                    "Drop connected components smaller than this (0 keeps all)")
        ->capture_default_str();
  }

  fodloc_localize_config& resolve(const Globals& g) {
    cfg.difference = difference == "ssim" ? FODLOC_DIFFERENCE_SSIM : FODLOC_DIFFERENCE_ABSOLUTE;
    cfg.jobs = g.jobs;
    cfg.unknown_dir = unknown_dir.empty() ? nullptr : unknown_dir.c_str();
    return cfg;
  }
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw Failure(FODLOC_ERR_PARSE, "not a number in threshold list: '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

// Files as given; directories contribute their *.png/*.jpg files in name order.
std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      if (!fs::exists(in)) throw Failure(FODLOC_ERR_IO, "no such file: " + in);
      out.push_back(in);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(in)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) {
        found.push_back(e.path().string());
      }
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

void log_epoch(int epoch, double train, double val, void*) {
  std::fprintf(stderr, "epoch %d  train %.6g  val %.6g\n", epoch, train, val);
}

void log_row(const char* name, const char* result, void*) {
  std::fprintf(stderr, "%-28s %s\n", name, result);
}

std::string or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback.string() : value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foreign object debris localization by reconstruction error", "fodloc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fodloc_version()));
  app.set_config("--config", "", "INI/TOML file; [subcommand] sections hold its options");
  app.option_defaults()->always_capture_default();

  Globals g;
  const char* env_dir = std::getenv("FODLOC_RUN_DIR");
  g.run_dir = env_dir && *env_dir ? env_dir : "runs";
  app.add_option("--run-dir", g.run_dir,
                 "Directory for default outputs and the resolved config (env FODLOC_RUN_DIR)")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker thread cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // gen-data ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  fodloc_scene_config scene{};
  fodloc_scene_config_default(&scene);
  std::string gen_out, shapes = scene.shapes, crop_shapes = "disk,bar";
  size_t n_train = 2000, n_test = 200, n_crops = 0;
  std::string gen_patch = "128x128";
  gen->add_option("out", gen_out, "Output directory")->required();
  gen->add_option("--train", n_train, "Clean training patches");
  gen->add_option("--test", n_test, "Test patches");
  gen->add_option("--crops", n_crops, "Also write this many labeled crops to out/crops");
  gen->add_option("--crop-shapes", crop_shapes, "Shapes (classes) for --crops");
  gen->add_option("--patch", gen_patch, "Patch size WxH");
  gen->add_option("--shapes", shapes, "Object shapes: disk,rectangle,triangle,bar");
  gen->add_option("--fraction-clean", scene.fraction_clean,
                  "Probability that a test patch holds no object");
  gen->add_option("--objects-min", scene.object_count_min);
  gen->add_option("--objects-max", scene.object_count_max);
  gen->add_option("--object-size-min", scene.object_size_min);
  gen->add_option("--object-size-max", scene.object_size_max);
  gen->add_option("--min-contrast", scene.min_contrast);
  gen->add_option("--gray-min", scene.base_gray_min);
  gen->add_option("--gray-max", scene.base_gray_max);
  gen->add_option("--tint", scene.tint);
  gen->add_option("--gradient", scene.gradient_amplitude);
  gen->add_option("--noise", scene.noise_amplitude);
  gen->add_option("--noise-components", scene.noise_components);
  gen->add_option("--noise-min-wavelength", scene.noise_min_wavelength);
  gen->add_option("--noise-max-wavelength", scene.noise_max_wavelength);
  gen->add_option("--grain", scene.grain_amplitude);
  gen->add_option("--marking-probability", scene.marking_probability);
  gen->add_option("--crack-probability", scene.crack_probability);

  // train -------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train an autoencoder on clean patches");
  TrainFlags train_flags;
  std::string train_manifest, train_out;
  train->add_option("manifest", train_manifest, "Dataset manifest.csv")->required();
  train->add_option("-o,--out", train_out, "Checkpoint path (default run-dir/model.ckpt)");
  train_flags.add(train, true);

  // train-classifier --------------------------------------------------------
  auto* train_cls = app.add_subcommand("train-classifier", "Train the crop classifier");
  TrainFlags cls_flags;
  std::string crops_dir, cls_out;
  int cls_input = 32;
  train_cls->add_option("crops", crops_dir, "Directory holding labels.csv")->required();
  train_cls->add_option("-o,--out", cls_out, "Checkpoint path (default run-dir/classifier.ckpt)");
  train_cls->add_option("--input-size", cls_input, "Square classifier input size");
  cls_flags.add(train_cls, false);

  // localize ----------------------------------------------------------------
  auto* localize = app.add_subcommand("localize", "Localize debris in images");
  LocalizeFlags loc_flags;
  std::string loc_ckpt, loc_out, loc_cls;
  std::vector<std::string> loc_inputs;
  localize->add_option("checkpoint", loc_ckpt, "Autoencoder checkpoint")->required();
  localize->add_option("inputs", loc_inputs, "Image files or directories");
  localize->add_option("-o,--out", loc_out, "Output directory (default run-dir/localize)");
  localize->add_option("--classifier", loc_cls, "Classifier checkpoint for labeling crops");
  localize->add_option("--unknown-threshold", loc_flags.cfg.unknown_threshold,
                       "Scores below this are labeled unknown");
  localize->add_option("--unknown-dir", loc_flags.unknown_dir, "Where to save unknown crops");
  loc_flags.add(localize);

  // classify ----------------------------------------------------------------
  auto* classify = app.add_subcommand("classify", "Label crop images");
  std::string clf_ckpt, clf_out, clf_unknown_dir;
  std::vector<std::string> clf_inputs;
  double clf_tau = 0.5;
  classify->add_option("checkpoint", clf_ckpt, "Classifier checkpoint")->required();
  classify->add_option("inputs", clf_inputs, "Crop files or directories");
  classify->add_option("-o,--out", clf_out, "CSV path (default run-dir/labels.csv)");
  classify->add_option("--unknown-threshold", clf_tau, "Scores below this are labeled unknown");
  classify->add_option("--unknown-dir", clf_unknown_dir, "Where to save unknown crops");

  // evaluate / sweep --------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "Detection rate against annotations");
  std::string ev_dets, ev_anns, ev_out;
  double ev_iou = 0.3;
  std::string ev_patch = "128x128";
  evaluate->add_option("detections", ev_dets, "Detection CSV")->required();
  evaluate->add_option("annotations", ev_anns, "Annotation CSV")->required();
  evaluate->add_option("--iou", ev_iou, "A match needs IoU above this");
  evaluate->add_option("--patch", ev_patch, "Patch size WxH the boxes must fit");
  evaluate->add_option("-o,--out", ev_out, "Report CSV (default run-dir/report.csv)");

  auto* sweep = app.add_subcommand("sweep", "Detection rate over IoU thresholds");
  std::string sw_dets, sw_anns, sw_out, sw_thresholds = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string sw_patch = "128x128";
  sweep->add_option("detections", sw_dets, "Detection CSV")->required();
  sweep->add_option("annotations", sw_anns, "Annotation CSV")->required();
  sweep->add_option("--thresholds", sw_thresholds, "Strictly increasing values in (0, 1)");
  sweep->add_option("--patch", sw_patch, "Patch size WxH the boxes must fit");
  sweep->add_option("-o,--out", sw_out, "Curve CSV (default run-dir/sweep.csv)");

  // ablate ------------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Train and score several autoencoder variants");
  TrainFlags abl_flags;
  LocalizeFlags abl_loc;
  fodloc_ablation_config abl_cfg{};
  fodloc_ablation_config_default(&abl_cfg);
  std::string abl_manifest, abl_out;
  std::vector<std::string> abl_specs{"depth=2", "depth=3", "depth=4", "depth=3,skip=true",
                                     "depth=3,vit=outer", "depth=3,vit=inner",
                                     "depth=3,vit=latent"};
  ablate->add_option("manifest", abl_manifest, "Dataset manifest.csv")->required();
  ablate->add_option("--variant", abl_specs, "Spec overrides per variant (repeatable)");
  ablate->add_option("--iou", abl_cfg.iou_threshold, "A match needs IoU above this");
  ablate->add_option("--weak-delta", abl_cfg.weak_delta,
                     "Median clean difference above which a row is None-Weak");
  ablate->add_option("--clean-holdout", abl_cfg.clean_holdout_fraction,
                     "Fraction of clean training patches scored as clean test data");
  ablate->add_option("-o,--out", abl_out, "Table CSV (default run-dir/ablation.csv)");
  abl_flags.add(ablate, false);
  abl_loc.add(ablate);

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path run_dir = g.run_dir;
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw Failure(FODLOC_ERR_IO, "cannot create run directory " + run_dir.string());
    auto echo_config = [&](const CLI::App* sub) {
      std::ofstream out(run_dir / (sub->get_name() + ".config.ini"));
      out << "run-dir=\"" << g.run_dir << "\"\nseed=" << g.seed << "\njobs=" << g.jobs
          << "\n\n[" << sub->get_name() << "]\n"
          << sub->config_to_str(true, false);
      if (!out) throw Failure(FODLOC_ERR_IO, "cannot write the resolved config");
    };

    if (*gen) {
      scene.seed = g.seed;
      const auto patch = parse_patch(gen_patch);
      scene.patch_width = patch.width;
      scene.patch_height = patch.height;
      if (shapes.size() >= sizeof scene.shapes) {
        throw Failure(FODLOC_ERR_CONFIG, "--shapes list too long");
      }
      std::snprintf(scene.shapes, sizeof scene.shapes, "%s", shapes.c_str());
      echo_config(gen);
      check(fodloc_build_dataset(&scene, n_train, n_test, gen_out.c_str()), "gen-data");
      if (n_crops > 0) {
        check(fodloc_build_crop_dataset(&scene, crop_shapes.c_str(), n_crops, gen_out.c_str()),
              "gen-data --crops");
      }
      std::cerr << "wrote " << n_train << " train and " << n_test << " test patches to "
                << gen_out << '\n';
    } else if (*train) {
      const auto cfg = train_flags.resolve(g);
      const auto spec = parse_spec(train_flags.spec);
      const auto out = or_default(train_out, run_dir / "model.ckpt");
      const auto metrics = (run_dir / "train_metrics.csv").string();
      echo_config(train);
      fodloc_autoencoder* model = nullptr;
      check(fodloc_autoencoder_train(train_manifest.c_str(), &spec, &cfg, metrics.c_str(),
                                     log_epoch, nullptr, &model),
            "train");
      const auto s = fodloc_autoencoder_save(model, out.c_str());
      fodloc_autoencoder_free(model);
      check(s, "saving " + out);
      std::cerr << "checkpoint " << out << '\n';
    } else if (*train_cls) {
      const auto cfg = cls_flags.resolve(g);
      const auto out = or_default(cls_out, run_dir / "classifier.ckpt");
      const auto metrics = (run_dir / "classifier_metrics.csv").string();
      echo_config(train_cls);
      fodloc_classifier* model = nullptr;
      check(fodloc_classifier_train(crops_dir.c_str(), &cfg, cls_input, metrics.c_str(),
                                    log_epoch, nullptr, &model),
            "train-classifier");
      const auto s = fodloc_classifier_save(model, out.c_str());
      fodloc_classifier_free(model);
      check(s, "saving " + out);
      std::cerr << "checkpoint " << out << '\n';
    } else if (*localize) {
      auto& cfg = loc_flags.resolve(g);
      const auto inputs = expand_inputs(loc_inputs);
      const auto out = or_default(loc_out, run_dir / "localize");
      echo_config(localize);
      fodloc_autoencoder* model = nullptr;
      check(fodloc_autoencoder_load(loc_ckpt.c_str(), &model), "loading " + loc_ckpt);
      fodloc_classifier* cls = nullptr;
      if (!loc_cls.empty()) {
        const auto s = fodloc_classifier_load(loc_cls.c_str(), &cls);
        if (s != FODLOC_OK) fodloc_autoencoder_free(model);
        check(s, "loading " + loc_cls);
      }
      const auto paths = c_strings(inputs);
      fodloc_localize_summary summary{};
      const auto s = fodloc_localize_images(model, paths.data(), paths.size(), &cfg, cls,
                                            out.c_str(), &summary);
      fodloc_classifier_free(cls);
      fodloc_autoencoder_free(model);
      check(s, "localize");
      std::cerr << summary.images << " images, " << summary.patches << " patches, "
                << summary.detections << " detections (" << summary.unknown
                << " unknown) -> " << out << '\n';
      if (summary.warnings) std::cerr << "warning: " << summary.warnings << " crops not saved\n";
    } else if (*classify) {
      const auto inputs = expand_inputs(clf_inputs);
      const auto out = or_default(clf_out, run_dir / "labels.csv");
      echo_config(classify);
      fodloc_classifier* model = nullptr;
      check(fodloc_classifier_load(clf_ckpt.c_str(), &model), "loading " + clf_ckpt);
      const auto paths = c_strings(inputs);
      const auto s = fodloc_classify_crops(
          model, paths.data(), paths.size(), clf_tau,
          clf_unknown_dir.empty() ? nullptr : clf_unknown_dir.c_str(), out.c_str());
      fodloc_classifier_free(model);
      check(s, "classify");
      std::cerr << inputs.size() << " crops -> " << out << '\n';
    } else if (*evaluate) {
      const auto patch = parse_patch(ev_patch);
      const auto out = or_default(ev_out, run_dir / "report.csv");
      echo_config(evaluate);
      fodloc_eval_summary summary{};
      check(fodloc_evaluate(ev_dets.c_str(), ev_anns.c_str(), patch.width, patch.height,
                            ev_iou, out.c_str(), &summary),
            "evaluate");
      std::printf("detection_rate=%.4f correct=%zu ground_truth=%zu false_positives=%zu\n",
                  summary.detection_rate, summary.n_correct, summary.n_ground_truth,
                  summary.n_false_positive);
    } else if (*sweep) {
      const auto thresholds = parse_list(sw_thresholds);
      const auto patch = parse_patch(sw_patch);
      const auto out = or_default(sw_out, run_dir / "sweep.csv");
      echo_config(sweep);
      std::vector<double> rates(thresholds.size());
      check(fodloc_sweep(sw_dets.c_str(), sw_anns.c_str(), patch.width, patch.height,
                         thresholds.data(), thresholds.size(), out.c_str(), rates.data()),
            "sweep");
      for (std::size_t i = 0; i < rates.size(); ++i) {
        std::printf("%g,%.4f\n", thresholds[i], rates[i]);
      }
    } else if (*ablate) {
      abl_cfg.train = abl_flags.resolve(g);
      abl_cfg.localize = abl_loc.resolve(g);
      std::vector<fodloc_autoencoder_spec> specs;
      for (const auto& s : abl_specs) specs.push_back(parse_spec(s));
      const auto out = or_default(abl_out, run_dir / "ablation.csv");
      echo_config(ablate);
      check(fodloc_ablate(abl_manifest.c_str(), specs.data(), specs.size(), &abl_cfg,
                          out.c_str(), log_row, nullptr),
            "ablate");
      std::cerr << "table -> " << out << '\n';
    }
  } catch (const Failure& f) {
    std::cerr << "fodloc: " << f.what() << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "fodloc: " << e.what() << '\n';
    return FODLOC_ERR_INTERNAL;
  }
  return 0;
}
