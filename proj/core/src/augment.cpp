// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/augment.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

void AugParams::validate() const {
  for (double p : {flip_prob, scale_prob, jitter_prob, grayscale_prob, blur_prob,
                   cutout_prob, colorspace_prob, mosaic_prob, mixup_ratio,
                   pseudo_mixup_prob, pseudo_mosaic_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("aug.*: probabilities and ratios must lie in [0, 1]");
    }
  }
  if (pseudo_mixup_prob + pseudo_mosaic_prob > 1.0) {
    throw ConfigError("aug.pseudo_mixup_prob + aug.pseudo_mosaic_prob must be <= 1");
  }
  if (!(scale_min > 0.0 && scale_min <= scale_max)) {
    throw ConfigError("aug.scale_min must be > 0 and <= aug.scale_max");
  }
  if (!(jitter_strength >= 0.0 && jitter_strength < 1.0)) {
    throw ConfigError("aug.jitter_strength must lie in [0, 1)");
  }
  if (!(blur_sigma_max > 0.0)) throw ConfigError("aug.blur_sigma_max must be > 0");
  if (!(cutout_max_area > 0.0 && cutout_max_area <= 1.0)) {
    throw ConfigError("aug.cutout_max_area must lie in (0, 1]");
  }
  if (!(pseudo_mosaic_scale > 0.0 && pseudo_mosaic_scale <= 1.0)) {
    throw ConfigError("aug.pseudo_mosaic_scale must lie in (0, 1]");
  }
  if (!(min_box_area >= 0.0)) throw ConfigError("aug.min_box_area must be >= 0");
}

void to_json(nlohmann::json& j, const AugOp& op) {
  j = nlohmann::json{{"op", op.name}, {"params", op.params}};
}

void from_json(const nlohmann::json& j, AugOp& op) {
  j.at("op").get_to(op.name);
  j.at("params").get_to(op.params);
}

AugmentedSample make_sample(Image image, DetectionSet boxes, int origin_offset) {
  AugmentedSample s;
  s.image = std::move(image);
  s.boxes = std::move(boxes);
  s.origin.resize(s.boxes.boxes.size());
  for (std::size_t i = 0; i < s.origin.size(); ++i) {
    s.origin[i] = origin_offset + static_cast<int>(i);
  }
  return s;
}

namespace {

// Keeps the boxes for which keep(box&) returns true after it edits them.
template <typename F>
void remap_boxes(AugmentedSample& s, F&& keep) {
  std::vector<Box> boxes;
  std::vector<int> origin;
  for (std::size_t i = 0; i < s.boxes.boxes.size(); ++i) {
    Box b = s.boxes.boxes[i];
    if (keep(b)) {
      boxes.push_back(b);
      origin.push_back(s.origin[i]);
    }
  }
  s.boxes.boxes = std::move(boxes);
  s.origin = std::move(origin);
}

// Clips to [x0, x1] x [y0, y1]; false if the remainder is below min_area.
bool clip_to(Box& b, double x0, double y0, double x1, double y1, double min_area) {
  const double nx1 = std::max(b.x1(), x0), ny1 = std::max(b.y1(), y0);
  const double nx2 = std::min(b.x2(), x1), ny2 = std::min(b.y2(), y1);
  if (nx2 <= nx1 || ny2 <= ny1) return false;
  if ((nx2 - nx1) * (ny2 - ny1) < min_area) return false;
  if (nx1 != b.x1() || ny1 != b.y1() || nx2 != b.x2() || ny2 != b.y2()) {
    b = Box::from_corners(nx1, ny1, nx2, ny2, b.class_id, b.score);
  }
  return true;
}

float sample_bilinear(const Image& img, double u, double v, int ch) {
  // (u, v) in pixel-index coordinates; outside the half-pixel border -> fill.
  if (u < -0.5 || v < -0.5 || u > img.width - 0.5 || v > img.height - 0.5) {
    return kFillValue;
  }
  u = std::clamp(u, 0.0, static_cast<double>(img.width - 1));
  v = std::clamp(v, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = u - x0, fy = v - y0;
  const double top = img.at(x0, y0, ch) * (1 - fx) + img.at(x1, y0, ch) * fx;
  const double bot = img.at(x0, y1, ch) * (1 - fx) + img.at(x1, y1, ch) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

AugmentedSample hflip(const AugmentedSample& s) {
  AugmentedSample out = s;
  out.record.clear();
  const int w = s.image.width;
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = s.image.at(w - 1 - x, y, ch);
  for (Box& b : out.boxes.boxes) b.cx = w - b.cx;
  return out;
}

AugmentedSample scale_about_center(const AugmentedSample& s, double f,
                                   double min_area) {
  if (!(f > 0.0)) throw ConfigError("scale factor must be > 0");
  AugmentedSample out = s;
  out.record.clear();
  const double hw = 0.5 * s.image.width, hh = 0.5 * s.image.height;
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x) {
      const double u = (x + 0.5 - hw) / f + hw - 0.5;
      const double v = (y + 0.5 - hh) / f + hh - 0.5;
      for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = sample_bilinear(s.image, u, v, ch);
    }
  const double W = s.image.width, H = s.image.height;
  remap_boxes(out, [&](Box& b) {
    b.cx = (b.cx - hw) * f + hw;
    b.cy = (b.cy - hh) * f + hh;
    b.w *= f;
    b.h *= f;
    return clip_to(b, 0.0, 0.0, W, H, min_area);
  });
  return out;
}

void color_jitter(Image& img, double brightness, double contrast,
                  double saturation) {
  double mean = 0.0;
  const std::size_t px = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < px; ++i) {
    mean += 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] +
            0.114 * img.data[3 * i + 2];
  }
  mean /= static_cast<double>(std::max<std::size_t>(1, px));
  for (std::size_t i = 0; i < px; ++i) {
    double rgb[3];
    for (int ch = 0; ch < 3; ++ch) rgb[ch] = img.data[3 * i + ch] * brightness;
    for (double& v : rgb) v = (v - mean) * contrast + mean;
    const double gray = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
    for (int ch = 0; ch < 3; ++ch) {
      img.data[3 * i + ch] = clamp01(gray + (rgb[ch] - gray) * saturation);
    }
  }
}

void to_grayscale(Image& img) {
  const std::size_t px = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < px; ++i) {
    const float g = clamp01(0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] +
                            0.114 * img.data[3 * i + 2]);
    img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = g;
  }
}

void gaussian_blur(Image& img, double sigma) {
  if (!(sigma > 0.0)) return;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= sum;
  const int W = img.width, H = img.height;
  std::vector<double> tmp(img.data.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += k[static_cast<std::size_t>(i + r)] * img.at(std::clamp(x + i, 0, W - 1), y, ch);
        }
        tmp[img.index(x, y, ch)] = acc;
      }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          acc += k[static_cast<std::size_t>(i + r)] * tmp[img.index(x, std::clamp(y + i, 0, H - 1), ch)];
        }
        img.at(x, y, ch) = clamp01(acc);
      }
}

void cutout(Image& img, int x, int y, int w, int h, float value) {
  const int x0 = std::max(0, x), y0 = std::max(0, y);
  const int x1 = std::min(img.width, x + w), y1 = std::min(img.height, y + h);
  for (int yy = y0; yy < y1; ++yy)
    for (int xx = x0; xx < x1; ++xx)
      for (int ch = 0; ch < 3; ++ch) img.at(xx, yy, ch) = clamp01(value);
}

void swap_red_blue(Image& img) {
  const std::size_t px = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < px; ++i) std::swap(img.data[3 * i], img.data[3 * i + 2]);
}

Image resize_image(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0) throw ShapeError("resize_image: empty target");
  if (width == img.width && height == img.height) return img;
  Image out(width, height);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const double v = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = sample_bilinear(img, u, v, ch);
    }
  return out;
}

AugmentedSample mosaic_place(std::span<const AugmentedSample> four, int canvas,
                             int cx, int cy, double source_scale, double min_area) {
  if (four.size() != 4) {
    throw ShapeError("mosaic needs exactly 4 samples, got " + std::to_string(four.size()));
  }
  if (canvas <= 0 || cx < 0 || cx > canvas || cy < 0 || cy > canvas) {
    throw ShapeError("mosaic centre outside the canvas");
  }
  if (!(source_scale > 0.0)) throw ConfigError("mosaic source scale must be > 0");
  AugmentedSample out;
  out.image = Image(canvas, canvas, kFillValue);
  out.boxes.image_id = four[0].boxes.image_id;
  for (int q = 0; q < 4; ++q) {
    const AugmentedSample& src = four[static_cast<std::size_t>(q)];
    const int sw = std::max(1, static_cast<int>(std::lround(src.image.width * source_scale)));
    const int sh = std::max(1, static_cast<int>(std::lround(src.image.height * source_scale)));
    const Image scaled = resize_image(src.image, sw, sh);
    const double fx = static_cast<double>(sw) / src.image.width;
    const double fy = static_cast<double>(sh) / src.image.height;
    const bool right = (q % 2) == 1;
    const bool bottom = q >= 2;
    const int ox = right ? cx : cx - sw;
    const int oy = bottom ? cy : cy - sh;
    const int qx0 = right ? cx : 0, qx1 = right ? canvas : cx;
    const int qy0 = bottom ? cy : 0, qy1 = bottom ? canvas : cy;
    for (int y = std::max(qy0, oy); y < std::min(qy1, oy + sh); ++y)
      for (int x = std::max(qx0, ox); x < std::min(qx1, ox + sw); ++x)
        for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = scaled.at(x - ox, y - oy, ch);
    for (std::size_t i = 0; i < src.boxes.boxes.size(); ++i) {
      Box b = src.boxes.boxes[i];
      b.cx = b.cx * fx + ox;
      b.cy = b.cy * fy + oy;
      b.w *= fx;
      b.h *= fy;
      if (!clip_to(b, qx0, qy0, qx1, qy1, min_area)) continue;
      out.boxes.boxes.push_back(b);
      out.origin.push_back(src.origin[i]);
    }
  }
  out.record.push_back({"mosaic", {static_cast<double>(cx), static_cast<double>(cy),
                                   source_scale, static_cast<double>(canvas)}});
  return out;
}

AugmentedSample pseudo_mixup(const AugmentedSample& a, const AugmentedSample& b,
                             double ratio) {
  if (a.image.width != b.image.width || a.image.height != b.image.height) {
    throw ShapeError("pseudo_mixup: canvas sizes differ");
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mixup ratio must lie in [0, 1]");
  AugmentedSample out;
  out.image = Image(a.image.width, a.image.height);
  for (std::size_t i = 0; i < out.image.data.size(); ++i) {
    out.image.data[i] = clamp01(ratio * a.image.data[i] + (1.0 - ratio) * b.image.data[i]);
  }
  out.boxes.image_id = a.boxes.image_id;
  out.boxes.boxes = a.boxes.boxes;
  out.boxes.boxes.insert(out.boxes.boxes.end(), b.boxes.boxes.begin(), b.boxes.boxes.end());
  out.origin = a.origin;
  out.origin.insert(out.origin.end(), b.origin.begin(), b.origin.end());
  out.record.push_back({"mixup", {ratio}});
  return out;
}

namespace {

std::size_t param_count(const std::string& name) {
  if (name == "hflip" || name == "grayscale" || name == "colorspace") return 0;
  if (name == "scale" || name == "blur" || name == "mixup") return 1;
  if (name == "jitter") return 3;
  if (name == "mosaic") return 4;
  if (name == "cutout") return 5;
  throw ConfigError("unknown augmentation op '" + name + "'");
}

AugmentedSample apply_single(AugmentedSample s, const AugOp& op, double min_area) {
  const auto& p = op.params;
  if (op.name == "hflip") {
    s = hflip(s);
  } else if (op.name == "scale") {
    s = scale_about_center(s, p[0], min_area);
  } else if (op.name == "jitter") {
    color_jitter(s.image, p[0], p[1], p[2]);
  } else if (op.name == "grayscale") {
    to_grayscale(s.image);
  } else if (op.name == "blur") {
    gaussian_blur(s.image, p[0]);
  } else if (op.name == "cutout") {
    cutout(s.image, static_cast<int>(p[0]), static_cast<int>(p[1]),
           static_cast<int>(p[2]), static_cast<int>(p[3]), static_cast<float>(p[4]));
  } else if (op.name == "colorspace") {
    swap_red_blue(s.image);
  } else {
    throw ConfigError("augmentation op '" + op.name + "' needs multiple inputs");
  }
  s.record.clear();
  return s;
}

}  // namespace

AugmentedSample replay(std::span<const AugmentedSample> inputs,
                       const AugRecord& record, double min_area) {
  for (const auto& op : record) {
    if (op.params.size() != param_count(op.name)) {
      throw ConfigError("augmentation op '" + op.name + "' has " +
                        std::to_string(op.params.size()) + " parameters");
    }
  }
  if (inputs.empty()) throw ShapeError("replay needs at least one input");
  AugmentedSample cur;
  std::size_t i = 0;
  if (!record.empty() && record[0].name == "mosaic") {
    if (inputs.size() < 4) throw ShapeError("mosaic replay needs 4 inputs");
    cur = mosaic_place(inputs.first(4), static_cast<int>(record[0].params[3]),
                       static_cast<int>(record[0].params[0]),
                       static_cast<int>(record[0].params[1]), record[0].params[2],
                       min_area);
    i = 1;
  } else if (!record.empty() && record[0].name == "mixup") {
    if (inputs.size() < 2) throw ShapeError("mixup replay needs 2 inputs");
    cur = pseudo_mixup(inputs[0], inputs[1], record[0].params[0]);
    i = 1;
  } else {
    cur = inputs[0];
  }
  cur.record.clear();
  for (std::size_t k = 0; k < i; ++k) cur.record.push_back(record[k]);
  for (; i < record.size(); ++i) {
    cur = apply_single(std::move(cur), record[i], min_area);
  }
  cur.record = record;
  return cur;
}

AugmentedSample mosaic_compose(std::span<const AugmentedSample> four, int canvas,
                               std::uint64_t seed, double source_scale,
                               double min_area) {
  Rng rng(seed);
  const int cx = rng.uniform_int(canvas / 4, canvas - canvas / 4);
  const int cy = rng.uniform_int(canvas / 4, canvas - canvas / 4);
  return mosaic_place(four, canvas, cx, cy, source_scale, min_area);
}

AugmentedSample weak_augment(std::span<const AugmentedSample> four, int canvas,
                             std::uint64_t seed, const AugParams& p) {
  if (four.size() != 4) {
    throw ShapeError("weak_augment needs the sample and 3 mosaic partners");
  }
  Rng rng(seed);
  AugRecord rec;
  if (rng.bernoulli(p.mosaic_prob)) {
    const int cx = rng.uniform_int(canvas / 4, canvas - canvas / 4);
    const int cy = rng.uniform_int(canvas / 4, canvas - canvas / 4);
    rec.push_back({"mosaic", {static_cast<double>(cx), static_cast<double>(cy), 1.0,
                              static_cast<double>(canvas)}});
  }
  if (rng.bernoulli(p.flip_prob)) rec.push_back({"hflip", {}});
  return replay(four, rec, p.min_box_area);
}

AugmentedSample weak_flip(const AugmentedSample& s, std::uint64_t seed,
                          const AugParams& p) {
  Rng rng(seed);
  AugRecord rec;
  if (rng.bernoulli(p.flip_prob)) rec.push_back({"hflip", {}});
  return replay(std::span<const AugmentedSample>(&s, 1), rec, p.min_box_area);
}

AugmentedSample strong_augment(const AugmentedSample& s, std::uint64_t seed,
                               const AugParams& p) {
  Rng rng(seed);
  AugRecord rec;
  const int W = s.image.width, H = s.image.height;
  if (rng.bernoulli(p.flip_prob)) rec.push_back({"hflip", {}});
  if (rng.bernoulli(p.scale_prob)) {
    rec.push_back({"scale", {rng.uniform(p.scale_min, p.scale_max)}});
  }
  if (rng.bernoulli(p.jitter_prob)) {
    const double s0 = p.jitter_strength;
    const double b = rng.uniform(1.0 - s0, 1.0 + s0);
    const double c = rng.uniform(1.0 - s0, 1.0 + s0);
    const double sat = rng.uniform(1.0 - s0, 1.0 + s0);
    rec.push_back({"jitter", {b, c, sat}});
  }
  if (rng.bernoulli(p.grayscale_prob)) rec.push_back({"grayscale", {}});
  if (rng.bernoulli(p.blur_prob)) {
    rec.push_back({"blur", {rng.uniform(0.1, p.blur_sigma_max)}});
  }
  if (rng.bernoulli(p.cutout_prob)) {
    const double area = rng.uniform(0.02, p.cutout_max_area) * W * H;
    const double aspect = rng.uniform(0.5, 2.0);
    const int cw = std::clamp(static_cast<int>(std::sqrt(area * aspect)), 1, W);
    const int ch = std::clamp(static_cast<int>(area / std::max(1, cw)), 1, H);
    const int x = rng.uniform_int(0, W - cw);
    const int y = rng.uniform_int(0, H - ch);
    const double v = static_cast<double>(rng.uniform_int(0, 255)) / 255.0;
    rec.push_back({"cutout", {static_cast<double>(x), static_cast<double>(y),
                              static_cast<double>(cw), static_cast<double>(ch), v}});
  }
  if (rng.bernoulli(p.colorspace_prob)) rec.push_back({"colorspace", {}});
  return replay(std::span<const AugmentedSample>(&s, 1), rec, p.min_box_area);
}

AugmentedSample pseudo_mosaic(std::span<const AugmentedSample> four, int canvas,
                              std::uint64_t seed, const AugParams& p) {
  return mosaic_compose(four, canvas, seed, p.pseudo_mosaic_scale, p.min_box_area);
}

std::vector<std::int64_t> class_counts(const DetectionSet& boxes, int num_classes) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(num_classes), 0);
  for (const Box& b : boxes.boxes) {
    if (b.class_id >= 0 && b.class_id < num_classes) ++out[static_cast<std::size_t>(b.class_id)];
  }
  return out;
}

}  // namespace ssod
