// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ssodlab/augment.hpp"
#include "ssodlab/errors.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

using nlohmann::json;

const std::vector<std::string>& SyntheticSceneSpec::class_names() {
  static const std::vector<std::string> names{"broadleaf blob", "grass streak",
                                              "crop rosette"};
  return names;
}

SyntheticSceneSpec SyntheticSceneSpec::shifted() const {
  SyntheticSceneSpec s = *this;
  s.hue_shift_deg = 40.0;
  s.blur_sigma = 1.5;
  return s;
}

void SyntheticSceneSpec::validate() const {
  if (canvas < 16) throw ConfigError("synthetic canvas must be >= 16 pixels");
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("synthetic object count range must satisfy 1 <= min <= max");
  }
  if (!(size_min > 0.0 && size_min <= size_max && size_max <= 1.0)) {
    throw ConfigError("synthetic size range must satisfy 0 < min <= max <= 1");
  }
  if (class_weights.empty() ||
      class_weights.size() > class_names().size()) {
    throw ConfigError("synthetic spec supports 1 to 3 classes");
  }
  double total = 0.0;
  for (double w : class_weights) {
    if (!(w >= 0.0)) throw ConfigError("class weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("class weights must not all be zero");
  if (!(blur_sigma >= 0.0)) throw ConfigError("blur sigma must be >= 0");
}

void to_json(json& j, const SyntheticSceneSpec& s) {
  j = json{{"canvas", s.canvas},
           {"min_objects", s.min_objects},
           {"max_objects", s.max_objects},
           {"size_min", s.size_min},
           {"size_max", s.size_max},
           {"class_weights", s.class_weights},
           {"hue_shift_deg", s.hue_shift_deg},
           {"blur_sigma", s.blur_sigma}};
}

void from_json(const json& j, SyntheticSceneSpec& s) {
  j.at("canvas").get_to(s.canvas);
  j.at("min_objects").get_to(s.min_objects);
  j.at("max_objects").get_to(s.max_objects);
  j.at("size_min").get_to(s.size_min);
  j.at("size_max").get_to(s.size_max);
  j.at("class_weights").get_to(s.class_weights);
  j.at("hue_shift_deg").get_to(s.hue_shift_deg);
  j.at("blur_sigma").get_to(s.blur_sigma);
}

void rotate_hue(Image& img, double degrees) {
  const std::size_t px = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < px; ++i) {
    const double r = img.data[3 * i], g = img.data[3 * i + 1], b = img.data[3 * i + 2];
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double d = mx - mn;
    if (d <= 0.0) continue;
    double h;
    if (mx == r) {
      h = std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      h = (b - r) / d + 2.0;
    } else {
      h = (r - g) / d + 4.0;
    }
    h = std::fmod(h * 60.0 + degrees + 720.0, 360.0);
    const double s = d / mx, v = mx;
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double rr = 0, gg = 0, bb = 0;
    switch (static_cast<int>(h / 60.0) % 6) {
      case 0: rr = c; gg = x; break;
      case 1: rr = x; gg = c; break;
      case 2: gg = c; bb = x; break;
      case 3: gg = x; bb = c; break;
      case 4: rr = x; bb = c; break;
      default: rr = c; bb = x; break;
    }
    img.data[3 * i] = static_cast<float>(std::clamp(rr + m, 0.0, 1.0));
    img.data[3 * i + 1] = static_cast<float>(std::clamp(gg + m, 0.0, 1.0));
    img.data[3 * i + 2] = static_cast<float>(std::clamp(bb + m, 0.0, 1.0));
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Shape {
  int cls = 0;
  double cx = 0, cy = 0, size = 0;
  double a = 0, b = 0;        // radii / half extents
  double angle = 0, phase = 0;
  double color[3] = {0, 0, 0};
  double accent[3] = {0, 0, 0};

  // Returns 0 outside, 1 body, 2 accent region.
  int hit(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    switch (cls) {
      case 0: {  // lobed blob
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = (dx * ca + dy * sa) / a, v = (-dx * sa + dy * ca) / b;
        const double t = std::atan2(v, u);
        const double r = 1.0 + 0.12 * std::sin(5.0 * t + phase);
        const double q = std::sqrt(u * u + v * v);
        if (q > r) return 0;
        return q < 0.35 * r && std::abs(std::sin(3.0 * t + phase)) < 0.25 ? 2 : 1;
      }
      case 1: {  // tapered streak
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = dx * ca + dy * sa, v = -dx * sa + dy * ca;
        if (std::abs(u) > a) return 0;
        const double half = b * (1.0 - 0.6 * std::abs(u) / a);
        return std::abs(v) <= half ? 1 : 0;
      }
      default: {  // five-petal rosette with a coloured centre
        const double q = std::sqrt(dx * dx + dy * dy);
        const double t = std::atan2(dy, dx);
        const double r = a * (0.45 + 0.55 * std::abs(std::cos(2.5 * t + phase)));
        if (q > r) return 0;
        return q < 0.3 * a ? 2 : 1;
      }
    }
  }
};

Shape draw_shape(Rng& rng, int cls, const SyntheticSceneSpec& spec) {
  Shape s;
  s.cls = cls;
  const double W = spec.canvas;
  s.size = rng.uniform(spec.size_min, spec.size_max) * W;
  s.angle = rng.uniform(0.0, kPi);
  s.phase = rng.uniform(0.0, 2.0 * kPi);
  const double jitter[3] = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                            rng.uniform(-0.05, 0.05)};
  switch (cls) {
    case 0:
      s.a = 0.5 * s.size * rng.uniform(0.8, 1.0);
      s.b = 0.5 * s.size * rng.uniform(0.65, 1.0);
      s.color[0] = 0.25; s.color[1] = 0.72; s.color[2] = 0.20;
      s.accent[0] = 0.15; s.accent[1] = 0.50; s.accent[2] = 0.12;
      break;
    case 1:
      s.a = 0.5 * s.size;
      s.b = std::max(1.2, s.size * rng.uniform(0.10, 0.16));
      s.color[0] = 0.88; s.color[1] = 0.82; s.color[2] = 0.30;
      break;
    default:
      s.a = 0.5 * s.size;
      s.color[0] = 0.16; s.color[1] = 0.42; s.color[2] = 0.22;
      s.accent[0] = 0.85; s.accent[1] = 0.30; s.accent[2] = 0.60;
      break;
  }
  for (int ch = 0; ch < 3; ++ch) {
    s.color[ch] = std::clamp(s.color[ch] + jitter[ch], 0.0, 1.0);
    s.accent[ch] = std::clamp(s.accent[ch] + jitter[ch], 0.0, 1.0);
  }
  const double margin = 0.5 * s.size;
  s.cx = rng.uniform(margin, W - margin);
  s.cy = rng.uniform(margin, W - margin);
  return s;
}

int draw_class(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform(0.0, total);
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (u < weights[c]) return static_cast<int>(c);
    u -= weights[c];
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

SyntheticScene render_scene(const SyntheticSceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int W = spec.canvas;
  SyntheticScene scene;
  scene.image = Image(W, W);

  const double soil[3] = {0.42 + rng.uniform(-0.04, 0.04), 0.31 + rng.uniform(-0.04, 0.04),
                          0.20 + rng.uniform(-0.03, 0.03)};
  double fx[3], fy[3], ph[3];
  for (int k = 0; k < 3; ++k) {
    fx[k] = rng.uniform(0.05, 0.3);
    fy[k] = rng.uniform(0.05, 0.3);
    ph[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      double wave = 0.0;
      for (int k = 0; k < 3; ++k) wave += 0.03 * std::sin(fx[k] * x + fy[k] * y + ph[k]);
      for (int ch = 0; ch < 3; ++ch) {
        scene.image.at(x, y, ch) = static_cast<float>(soil[ch] + wave);
      }
    }

  const int count = rng.uniform_int(spec.min_objects, spec.max_objects);
  for (int i = 0; i < count; ++i) {
    const int cls = draw_class(rng, spec.class_weights);
    const Shape s = draw_shape(rng, cls, spec);
    int x0 = W, y0 = W, x1 = -1, y1 = -1;
    const int lo_x = std::max(0, static_cast<int>(s.cx - s.size) - 1);
    const int hi_x = std::min(W - 1, static_cast<int>(s.cx + s.size) + 1);
    const int lo_y = std::max(0, static_cast<int>(s.cy - s.size) - 1);
    const int hi_y = std::min(W - 1, static_cast<int>(s.cy + s.size) + 1);
    for (int y = lo_y; y <= hi_y; ++y)
      for (int x = lo_x; x <= hi_x; ++x) {
        const int h = s.hit(x + 0.5, y + 0.5);
        if (h == 0) continue;
        const double* col = h == 2 ? s.accent : s.color;
        for (int ch = 0; ch < 3; ++ch) scene.image.at(x, y, ch) = static_cast<float>(col[ch]);
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
    if (x1 < 0) continue;
    scene.mask_bounds.push_back({x0, y0, x1, y1});
    scene.boxes.push_back(Box::from_corners(x0, y0, x1, y1, cls, 1.0));
  }

  for (float& v : scene.image.data) {
    v = static_cast<float>(std::clamp(v + rng.normal(0.0, 0.02), 0.0, 1.0));
  }
  if (spec.hue_shift_deg != 0.0) rotate_hue(scene.image, spec.hue_shift_deg);
  if (spec.blur_sigma > 0.0) gaussian_blur(scene.image, spec.blur_sigma);
  quantize(scene.image);
  return scene;
}

namespace {

std::string image_file_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld.ppm", static_cast<long long>(id));
  return buf;
}

}  // namespace

InMemoryDataset render_dataset(const SyntheticSceneSpec& spec, int n,
                               std::uint64_t seed, std::int64_t id_offset) {
  if (n < 1) throw ConfigError("dataset needs at least one image");
  InMemoryDataset out;
  const auto& names = SyntheticSceneSpec::class_names();
  out.meta.class_names.assign(names.begin(), names.begin() + spec.num_classes());
  for (int c = 0; c < spec.num_classes(); ++c) out.meta.category_ids.push_back(c + 1);
  for (int i = 0; i < n; ++i) {
    SyntheticScene sc = render_scene(spec, derive_seed({seed, static_cast<std::uint64_t>(i)}));
    DatasetImage im;
    im.id = id_offset + i;
    im.file_name = image_file_name(im.id);
    im.width = spec.canvas;
    im.height = spec.canvas;
    im.boxes = std::move(sc.boxes);
    out.meta.images.push_back(std::move(im));
    out.images.push_back(std::move(sc.image));
  }
  return out;
}

json gen_synthetic_dataset(const SyntheticSceneSpec& spec, int n,
                           std::uint64_t seed, const std::filesystem::path& out_dir) {
  InMemoryDataset ds = render_dataset(spec, n, seed);
  std::filesystem::create_directories(out_dir / "images");
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    write_ppm(ds.images[i], out_dir / "images" / ds.meta.images[i].file_name);
  }
  write_coco(ds.meta, out_dir / "annotations.json");
  json manifest{{"num_images", n},
                {"seed", seed},
                {"spec", spec},
                {"classes", ds.meta.class_names},
                {"annotations", "annotations.json"},
                {"image_dir", "images"}};
  json files = json::array();
  for (const auto& im : ds.meta.images) {
    files.push_back({{"id", im.id}, {"file_name", im.file_name},
                     {"num_boxes", im.boxes.size()}});
  }
  manifest["images"] = std::move(files);
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing manifest.json");
  return manifest;
}

InMemoryDataset load_dataset(const std::filesystem::path& annotations) {
  InMemoryDataset out;
  out.meta = load_coco_annotations(annotations);
  for (std::size_t i = 0; i < out.meta.images.size(); ++i) {
    out.images.push_back(out.meta.load_image(i));
  }
  return out;
}

}  // namespace ssod
