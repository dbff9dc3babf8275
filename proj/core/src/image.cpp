// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "ssodlab/errors.hpp"

namespace ssod {

namespace {

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(
      std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void quantize(Image& img) {
  for (float& v : img.data) v = static_cast<float>(to_byte(v)) / 255.0f;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

namespace {

int read_header_int(std::istream& is, const std::string& where) {
  int c = is.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else {
      is.get();
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v)) throw ParseError(where + ": malformed PPM header");
  return v;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open image " + path.string());
  std::string magic;
  is >> magic;
  if (magic != "P6") throw ParseError(path.string() + ": not a binary PPM");
  const int w = read_header_int(is, path.string());
  const int h = read_header_int(is, path.string());
  const int maxval = read_header_int(is, path.string());
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ParseError(path.string() + ": unsupported PPM dimensions or depth");
  }
  is.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string() + ": truncated pixel data");
  }
  Image img(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
  }
  return img;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) return Tensor();
  const int w = images.front().width;
  const int h = images.front().height;
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.width != w || img.height != h) {
      throw ShapeError("images_to_tensor: mixed image sizes in one batch");
    }
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          t.at(static_cast<int>(n), ch, y, x) = img.at(x, y, ch) - 0.5;
        }
  }
  return t;
}

Image tensor_to_image(const Tensor& t, int n) {
  if (t.c() != 3) throw ShapeError("tensor_to_image: expected 3 channels");
  Image img(t.w(), t.h());
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x) {
        img.at(x, y, ch) = static_cast<float>(t.at(n, ch, y, x) + 0.5);
      }
  return img;
}

}  // namespace ssod
