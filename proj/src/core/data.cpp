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

#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "core/csv.hpp"
#include "core/imaging.hpp"
#include "core/rng.hpp"

namespace fodloc {
namespace {

using csv::trim;

std::vector<std::string> split_csv(const std::string& line) {
  return csv::split(line);
}

int parse_int(const std::string& s, int line_no, const char* what) {
  return csv::to_int(s, line_no, what);
}

std::string id_for(const char* prefix, std::size_t index) {
  std::ostringstream os;
  os << prefix << '_' << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

// --- background ---------------------------------------------------------

struct Rgb {
  double r, g, b;
};

double coverage(double distance, double half_width) {
  return std::clamp(half_width - distance + 0.5, 0.0, 1.0);
}

double segment_distance(double px, double py, double ax, double ay, double bx,
                        double by) {
  const double vx = bx - ax;
  const double vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx);
  const double dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

void blend(Image& img, int x, int y, const Rgb& c, double alpha) {
  img.at(x, y, 0) = static_cast<float>(img.at(x, y, 0) * (1 - alpha) + c.r * alpha);
  img.at(x, y, 1) = static_cast<float>(img.at(x, y, 1) * (1 - alpha) + c.g * alpha);
  img.at(x, y, 2) = static_cast<float>(img.at(x, y, 2) * (1 - alpha) + c.b * alpha);
}

struct Background {
  Image image;
  Rgb mean;
};

Background render_background(const SyntheticSceneConfig& cfg, Rng& rng) {
  const int w = cfg.patch_size.width;
  const int h = cfg.patch_size.height;
  const double base = rng.uniform(cfg.base_gray_min, cfg.base_gray_max);
  const Rgb tint{rng.uniform(-cfg.tint, cfg.tint),
                 rng.uniform(-cfg.tint, cfg.tint),
                 rng.uniform(-cfg.tint, cfg.tint)};
  const double grad_angle = rng.uniform(0.0, 2 * std::numbers::pi);
  const double grad_amp = rng.uniform(0.0, cfg.gradient_amplitude);
  const double gx = std::cos(grad_angle) / std::max(w, h);
  const double gy = std::sin(grad_angle) / std::max(w, h);

  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  double power = 0.0;
  for (int k = 0; k < cfg.noise_components; ++k) {
    const double lambda =
        rng.uniform(cfg.noise_min_wavelength, cfg.noise_max_wavelength);
    const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
    const double freq = 2 * std::numbers::pi / lambda;
    const Wave wave{freq * std::cos(angle), freq * std::sin(angle),
                    rng.uniform(0.0, 2 * std::numbers::pi), rng.uniform(0.5, 1.0)};
    power += wave.amp * wave.amp / 2;
    waves.push_back(wave);
  }
  const double wave_scale = power > 0 ? cfg.noise_amplitude / std::sqrt(power) : 0.0;

  Image img(w, h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double lum = base + grad_amp * ((px - w / 2.0) * gx + (py - h / 2.0) * gy);
      for (const Wave& wv : waves) {
        lum += wave_scale * wv.amp * std::cos(wv.kx * px + wv.ky * py + wv.phase);
      }
      img.at(x, y, 0) = static_cast<float>(lum + tint.r);
      img.at(x, y, 1) = static_cast<float>(lum + tint.g);
      img.at(x, y, 2) = static_cast<float>(lum + tint.b);
    }
  }

  if (rng.bernoulli(cfg.marking_probability)) {
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double cx = rng.uniform(0.0, w);
    const double cy = rng.uniform(0.0, h);
    const double half = rng.uniform(cfg.marking_width_min, cfg.marking_width_max) / 2;
    const Rgb paint = rng.bernoulli(0.5) ? Rgb{0.90, 0.90, 0.88}
                                         : Rgb{0.92, 0.80, 0.35};
    const double nx = -std::sin(angle);
    const double ny = std::cos(angle);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double d = std::fabs((x + 0.5 - cx) * nx + (y + 0.5 - cy) * ny);
        const double a = coverage(d, half);
        if (a > 0) blend(img, x, y, paint, a);
      }
    }
  }

  if (rng.bernoulli(cfg.crack_probability)) {
    double ax = rng.uniform(0.0, w);
    double ay = rng.uniform(0.0, h);
    double heading = rng.uniform(0.0, 2 * std::numbers::pi);
    const Rgb dark{base * 0.55, base * 0.55, base * 0.55};
    for (int seg = 0; seg < 6; ++seg) {
      heading += rng.uniform(-0.6, 0.6);
      const double len = rng.uniform(0.08, 0.2) * std::max(w, h);
      const double bx = ax + len * std::cos(heading);
      const double by = ay + len * std::sin(heading);
      const int x0 = std::max(0, static_cast<int>(std::min(ax, bx)) - 2);
      const int x1 = std::min(w, static_cast<int>(std::max(ax, bx)) + 3);
      const int y0 = std::max(0, static_cast<int>(std::min(ay, by)) - 2);
      const int y1 = std::min(h, static_cast<int>(std::max(ay, by)) + 3);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const double a = coverage(segment_distance(x + 0.5, y + 0.5, ax, ay, bx, by), 0.5);
          if (a > 0) blend(img, x, y, dark, a);
        }
      }
      ax = bx;
      ay = by;
    }
  }

  if (cfg.grain_amplitude > 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double g = cfg.grain_amplitude * rng.normal();
        for (int c = 0; c < 3; ++c) img.at(x, y, c) += static_cast<float>(g);
      }
    }
  }

  for (auto& v : img.pixels()) v = std::clamp(v, 0.0f, 1.0f);
  return {std::move(img), Rgb{base + tint.r, base + tint.g, base + tint.b}};
}

// --- objects -------------------------------------------------------------

// Rasterizes a shape filling the w x h box; the mask touches all four sides.
std::vector<std::uint8_t> rasterize(ObjectShape shape, int w, int h,
                                    bool flip) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h, 0);
  const double thickness = std::max(3.0, std::min(w, h) / 3.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      bool in = false;
      switch (shape) {
        case ObjectShape::kRectangle:
          in = true;
          break;
        case ObjectShape::kDisk: {
          const double dx = (px - w / 2.0) / (w / 2.0);
          const double dy = (py - h / 2.0) / (h / 2.0);
          in = dx * dx + dy * dy <= 1.0;
          break;
        }
        case ObjectShape::kTriangle: {
          // Apex at the top (or bottom when flipped); the base row spans w.
          const int row = flip ? h - 1 - y : y;
          const double half = std::max(0.5, (w / 2.0) * (row + 1.0) / h);
          in = std::fabs(px - w / 2.0) <= half;
          break;
        }
        case ObjectShape::kBar: {
          const double d = flip ? segment_distance(px, py, w, 0, 0, h)
                                : segment_distance(px, py, 0, 0, w, h);
          in = d <= thickness / 2;
          break;
        }
      }
      m[static_cast<std::size_t>(y) * w + x] = in ? 1 : 0;
    }
  }
  return m;
}

Rgb pick_color(const SyntheticSceneConfig& cfg, const Rgb& bg, Rng& rng) {
  Rgb best{0, 0, 0};
  double best_contrast = -1.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const Rgb c{rng.uniform(cfg.color_min, cfg.color_max),
                rng.uniform(cfg.color_min, cfg.color_max),
                rng.uniform(cfg.color_min, cfg.color_max)};
    const double contrast =
        (std::fabs(c.r - bg.r) + std::fabs(c.g - bg.g) + std::fabs(c.b - bg.b)) / 3;
    if (contrast > best_contrast) {
      best = c;
      best_contrast = contrast;
    }
    if (contrast >= cfg.min_contrast) break;
  }
  return best;
}

bool overlaps(const BoundingBox& a, const BoundingBox& b) {
  return a.x_min < b.x_max + 2 && b.x_min < a.x_max + 2 &&
         a.y_min < b.y_max + 2 && b.y_min < a.y_max + 2;
}

}  // namespace

// --------------------------------------------------------------- frames

Frame load_frame(const std::filesystem::path& path) {
  return Frame{read_rgb(path), path.stem().string()};
}

Frame resize_to_grid(const Frame& frame, const PatchSpec& spec) {
  spec.validate();
  const int cols = frame.width() / spec.width;
  const int rows = frame.height() / spec.height;
  if (cols < 1 || rows < 1) {
    throw SizeError("frame " + std::to_string(frame.width()) + "x" +
                    std::to_string(frame.height()) + " smaller than one " +
                    std::to_string(spec.width) + "x" +
                    std::to_string(spec.height) + " patch");
  }
  return Frame{resize_bilinear(frame.image, cols * spec.width, rows * spec.height),
               frame.source_id};
}

std::vector<ImagePatch> split_into_patches(const Frame& frame,
                                           const PatchSpec& spec) {
  spec.validate();
  if (frame.width() % spec.width != 0 || frame.height() % spec.height != 0 ||
      frame.width() == 0 || frame.height() == 0) {
    throw SizeError("frame " + std::to_string(frame.width()) + "x" +
                    std::to_string(frame.height()) +
                    " is not a multiple of the patch size; resize first");
  }
  const int rows = frame.height() / spec.height;
  const int cols = frame.width() / spec.width;
  std::vector<ImagePatch> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const BoundingBox box{c * spec.width, r * spec.height,
                            (c + 1) * spec.width, (r + 1) * spec.height};
      out.push_back(ImagePatch{crop(frame.image, box).image, GridCell{r, c}});
    }
  }
  return out;
}

Image assemble_patches(const std::vector<ImagePatch>& patches,
                       const PatchSpec& spec, int rows, int cols) {
  if (static_cast<int>(patches.size()) != rows * cols) {
    throw CompletenessError("assemble: expected " + std::to_string(rows * cols) +
                            " patches, got " + std::to_string(patches.size()));
  }
  Image out(cols * spec.width, rows * spec.height, 3);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    const BoundingBox box{c * spec.width, r * spec.height, (c + 1) * spec.width,
                          (r + 1) * spec.height};
    paste(out, CroppedLocalization{patches[i].image, box});
  }
  return out;
}

// ---------------------------------------------------------- annotations

std::vector<GroundTruth> parse_annotations(const std::string& text,
                                           const PatchSpec& patch) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<GroundTruth> out;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != kAnnotationHeader) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected header '" + kAnnotationHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 6) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields, got " +
                       std::to_string(f.size()));
    }
    if (f[0].empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty patch_id");
    }
    GroundTruth gt{f[0],
                   {parse_int(f[1], line_no, "x_min"), parse_int(f[2], line_no, "y_min"),
                    parse_int(f[3], line_no, "x_max"), parse_int(f[4], line_no, "y_max")},
                   f[5]};
    if (!gt.box.valid()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": box must satisfy x_min < x_max and y_min < y_max");
    }
    if (!gt.box.inside(patch.width, patch.height)) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": box outside the " + std::to_string(patch.width) +
                            "x" + std::to_string(patch.height) + " patch");
    }
    out.push_back(std::move(gt));
  }
  if (!header_seen) throw ParseError("line 1: missing header");
  return out;
}

std::vector<GroundTruth> load_annotations(const std::filesystem::path& path,
                                          const PatchSpec& patch) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_annotations(text.str(), patch);
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<GroundTruth>& truths) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << kAnnotationHeader << '\n';
  for (const auto& gt : truths) {
    out << gt.patch_id << ',' << gt.box.x_min << ',' << gt.box.y_min << ','
        << gt.box.x_max << ',' << gt.box.y_max << ',' << gt.label << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ------------------------------------------------------- synthetic data

std::string to_string(ObjectShape shape) {
  switch (shape) {
    case ObjectShape::kDisk: return "disk";
    case ObjectShape::kRectangle: return "rectangle";
    case ObjectShape::kTriangle: return "triangle";
    case ObjectShape::kBar: return "bar";
  }
  return "unknown";
}

ObjectShape parse_shape(const std::string& name) {
  for (auto s : {ObjectShape::kDisk, ObjectShape::kRectangle,
                 ObjectShape::kTriangle, ObjectShape::kBar}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown shape '" + name + "'");
}

void SyntheticSceneConfig::validate() const {
  patch_size.validate();
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(base_gray_min) || !unit(base_gray_max) || base_gray_min > base_gray_max) {
    throw ConfigError("base gray range must be an ordered sub-range of [0,1]");
  }
  if (!unit(fraction_clean) || !unit(marking_probability) ||
      !unit(crack_probability)) {
    throw ConfigError("probabilities must lie in [0,1]");
  }
  if (object_count_min < 0 || object_count_min > object_count_max) {
    throw ConfigError("object count range must satisfy 0 <= min <= max");
  }
  if (object_size_min < 1 || object_size_min > object_size_max) {
    throw ConfigError("object size range must satisfy 1 <= min <= max");
  }
  if (object_size_max >= std::min(patch_size.width, patch_size.height)) {
    throw ConfigError("object size must be smaller than the patch");
  }
  if (shapes.empty() && object_count_max > 0) {
    throw ConfigError("at least one object shape is required");
  }
  if (!unit(color_min) || !unit(color_max) || color_min > color_max) {
    throw ConfigError("color range must be an ordered sub-range of [0,1]");
  }
  if (noise_components < 0 || noise_min_wavelength <= 0 ||
      noise_min_wavelength > noise_max_wavelength) {
    throw ConfigError("noise wavelengths must satisfy 0 < min <= max");
  }
  if (noise_amplitude < 0 || grain_amplitude < 0 || gradient_amplitude < 0 ||
      tint < 0) {
    throw ConfigError("texture amplitudes must be non-negative");
  }
  if (marking_width_min <= 0 || marking_width_min > marking_width_max) {
    throw ConfigError("marking width range must satisfy 0 < min <= max");
  }
}

SyntheticScene generate_clean_scene(const SyntheticSceneConfig& config,
                                    const std::string& /*patch_id*/) {
  config.validate();
  Rng rng(config.seed);
  rng.next();  // keeps the background stream aligned with generate_synthetic_scene
  Background bg = render_background(config, rng);
  return SyntheticScene{ImagePatch{std::move(bg.image), std::nullopt}, {}, {}};
}

SyntheticScene generate_synthetic_scene(const SyntheticSceneConfig& config,
                                        const std::string& patch_id) {
  config.validate();
  Rng rng(config.seed);
  const bool clean = rng.uniform() < config.fraction_clean;
  Background bg = render_background(config, rng);
  SyntheticScene scene{ImagePatch{std::move(bg.image), std::nullopt}, {}, {}};
  if (clean) return scene;

  const int w = config.patch_size.width;
  const int h = config.patch_size.height;
  const auto count = rng.uniform_int(config.object_count_min, config.object_count_max);
  std::vector<BoundingBox> placed;
  for (std::int64_t i = 0; i < count; ++i) {
    const auto shape = config.shapes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(config.shapes.size()) - 1))];
    const int ow = static_cast<int>(rng.uniform_int(config.object_size_min, config.object_size_max));
    const int oh = static_cast<int>(rng.uniform_int(config.object_size_min, config.object_size_max));
    const bool flip = rng.bernoulli(0.5);
    const Rgb color = pick_color(config, bg.mean, rng);
    BoundingBox box;
    bool ok = false;
    for (int attempt = 0; attempt < 32 && !ok; ++attempt) {
      const int x0 = static_cast<int>(rng.uniform_int(0, w - ow));
      const int y0 = static_cast<int>(rng.uniform_int(0, h - oh));
      box = {x0, y0, x0 + ow, y0 + oh};
      ok = std::none_of(placed.begin(), placed.end(),
                        [&](const BoundingBox& b) { return overlaps(b, box); });
    }
    if (!ok) continue;
    placed.push_back(box);

    const auto local = rasterize(shape, ow, oh, flip);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
    BoundingBox tight{w, h, -1, -1};
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        if (!local[static_cast<std::size_t>(y) * ow + x]) continue;
        const int px = box.x_min + x;
        const int py = box.y_min + y;
        mask[static_cast<std::size_t>(py) * w + px] = 1;
        blend(scene.patch.image, px, py, color, 1.0);
        tight.x_min = std::min(tight.x_min, px);
        tight.y_min = std::min(tight.y_min, py);
        tight.x_max = std::max(tight.x_max, px + 1);
        tight.y_max = std::max(tight.y_max, py + 1);
      }
    }
    scene.truths.push_back(GroundTruth{patch_id, tight, to_string(shape)});
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

std::vector<LabeledCrop> generate_labeled_crops(
    const SyntheticSceneConfig& config, const std::vector<ObjectShape>& shapes,
    std::size_t count) {
  if (shapes.empty()) throw ConfigError("crop dataset needs at least one shape");
  std::vector<LabeledCrop> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSceneConfig cfg = config;
    cfg.seed = mix_seed(config.seed ^ 0xC40F5ULL, i);
    cfg.shapes = {shapes[i % shapes.size()]};
    cfg.object_count_min = cfg.object_count_max = 1;
    cfg.fraction_clean = 0.0;
    const SyntheticScene scene = generate_synthetic_scene(cfg);
    if (scene.truths.empty()) continue;
    out.push_back({crop(scene.patch.image, scene.truths.front().box).image,
                   scene.truths.front().label});
  }
  return out;
}

// ------------------------------------------------------------- datasets

std::uint64_t train_scene_seed(std::uint64_t seed, std::size_t index) {
  return mix_seed(seed, 2 * static_cast<std::uint64_t>(index));
}

std::uint64_t test_scene_seed(std::uint64_t seed, std::size_t index) {
  return mix_seed(seed, 2 * static_cast<std::uint64_t>(index) + 1);
}

std::string split_name(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(),
      [split](const ManifestEntry& e) { return e.split == split; }));
}

DatasetManifest build_dataset(const SyntheticSceneConfig& config,
                              std::size_t n_train_clean, std::size_t n_test,
                              const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "train", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "test", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (std::size_t i = 0; i < n_train_clean; ++i) {
    SyntheticSceneConfig cfg = config;
    cfg.seed = train_scene_seed(config.seed, i);
    const std::string id = id_for("train", i);
    const SyntheticScene scene = generate_clean_scene(cfg, id);
    const std::string rel = "train/" + id + ".png";
    write_rgb_png(scene.patch.image, out_dir / rel);
    manifest.entries.push_back({rel, Split::kTrain, config.patch_size});
  }
  std::vector<GroundTruth> truths;
  for (std::size_t i = 0; i < n_test; ++i) {
    SyntheticSceneConfig cfg = config;
    cfg.seed = test_scene_seed(config.seed, i);
    const std::string id = id_for("test", i);
    const SyntheticScene scene = generate_synthetic_scene(cfg, id);
    const std::string rel = "test/" + id + ".png";
    write_rgb_png(scene.patch.image, out_dir / rel);
    manifest.entries.push_back({rel, Split::kTest, config.patch_size});
    truths.insert(truths.end(), scene.truths.begin(), scene.truths.end());
  }
  write_annotations(out_dir / manifest.annotations, truths);
  write_manifest(manifest);
  return manifest;
}

void build_crop_dataset(const SyntheticSceneConfig& config,
                        const std::vector<ObjectShape>& shapes,
                        std::size_t count, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "crops", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const auto crops = generate_labeled_crops(config, shapes, count);
  std::ofstream labels(out_dir / "crops" / "labels.csv");
  if (!labels) throw IoError("cannot write crop labels");
  labels << "path,label\n";
  for (std::size_t i = 0; i < crops.size(); ++i) {
    const std::string name = id_for("crop", i) + ".png";
    write_rgb_png(crops[i].image, out_dir / "crops" / name);
    labels << name << ',' << crops[i].label << '\n';
  }
}

std::vector<LabeledCrop> load_crop_dataset(const std::filesystem::path& dir) {
  const auto labels_path = dir / "labels.csv";
  std::ifstream in(labels_path);
  if (!in) throw IoError("cannot open " + labels_path.string());
  std::string line;
  int line_no = 0;
  std::vector<LabeledCrop> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (trim(line) != "path,label") {
        throw ParseError("line 1: expected header 'path,label'");
      }
      continue;
    }
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected path,label");
    }
    out.push_back({read_rgb(dir / f[0]), f[1]});
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest) {
  std::ofstream out(manifest.root / "manifest.csv");
  if (!out) throw IoError("cannot write manifest in " + manifest.root.string());
  out << kManifestHeader << '\n';
  for (const auto& e : manifest.entries) {
    out << e.path << ',' << split_name(e.split) << ',' << e.size.width << ','
        << e.size.height << '\n';
  }
  if (!out) throw IoError("manifest write failed");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (trim(line) != kManifestHeader) {
        throw ParseError("line 1: expected header '" + std::string(kManifestHeader) + "'");
      }
      continue;
    }
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    Split split;
    if (f[1] == "train") {
      split = Split::kTrain;
    } else if (f[1] == "test") {
      split = Split::kTest;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": split must be train or test");
    }
    manifest.entries.push_back(
        {f[0], split,
         PatchSpec{parse_int(f[2], line_no, "width"), parse_int(f[3], line_no, "height")}});
  }
  if (line_no == 0) throw ParseError("line 1: missing header");
  return manifest;
}

}  // namespace fodloc
