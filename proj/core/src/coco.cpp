// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/coco.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"

namespace ssod {

using nlohmann::json;

std::size_t Dataset::index_of(std::int64_t image_id) const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].id == image_id) return i;
  }
  throw OutOfBoundsError("image id " + std::to_string(image_id) + " not in dataset");
}

DetectionSet Dataset::ground_truth(std::size_t index) const {
  const DatasetImage& im = images.at(index);
  return DetectionSet{im.id, im.boxes};
}

Image Dataset::load_image(std::size_t index) const {
  return read_ppm(image_root / images.at(index).file_name);
}

namespace {

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing key '" + key + "'");
  }
  return obj.at(key);
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": key '" + key + "' has the wrong type");
  }
}

}  // namespace

Dataset parse_coco(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("annotation file is not valid JSON: ") + e.what());
  }
  for (const char* key : {"images", "annotations", "categories"}) {
    if (!require(root, key, "annotation file").is_array()) {
      throw ParseError(std::string("annotation file: '") + key + "' must be an array");
    }
  }
  Dataset ds;
  std::map<std::int64_t, std::string> cats;
  const json& jc = root.at("categories");
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const std::string where = "categories[" + std::to_string(i) + "]";
    const auto id = get_as<std::int64_t>(jc[i], "id", where);
    const auto name = jc[i].contains("name") ? get_as<std::string>(jc[i], "name", where)
                                             : std::to_string(id);
    if (!cats.emplace(id, name).second) {
      throw ParseError(where + ": duplicate category id " + std::to_string(id));
    }
  }
  std::map<std::int64_t, int> cat_index;
  for (const auto& [id, name] : cats) {
    cat_index[id] = static_cast<int>(ds.class_names.size());
    ds.class_names.push_back(name);
    ds.category_ids.push_back(id);
  }
  std::map<std::int64_t, std::size_t> img_index;
  const json& ji = root.at("images");
  for (std::size_t i = 0; i < ji.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    DatasetImage im;
    im.id = get_as<std::int64_t>(ji[i], "id", where);
    im.file_name = ji[i].contains("file_name")
                       ? get_as<std::string>(ji[i], "file_name", where)
                       : std::string();
    im.width = ji[i].contains("width") ? get_as<int>(ji[i], "width", where) : 0;
    im.height = ji[i].contains("height") ? get_as<int>(ji[i], "height", where) : 0;
    if (!img_index.emplace(im.id, ds.images.size()).second) {
      throw ParseError(where + ": duplicate image id " + std::to_string(im.id));
    }
    ds.images.push_back(std::move(im));
  }
  const json& ja = root.at("annotations");
  for (std::size_t i = 0; i < ja.size(); ++i) {
    const std::string where = "annotations[" + std::to_string(i) + "]";
    const auto image_id = get_as<std::int64_t>(ja[i], "image_id", where);
    const auto cat = get_as<std::int64_t>(ja[i], "category_id", where);
    const json& bb = require(ja[i], "bbox", where);
    if (!bb.is_array() || bb.size() != 4 ||
        !std::all_of(bb.begin(), bb.end(), [](const json& v) { return v.is_number(); })) {
      throw ParseError(where + ": bbox must be [x, y, width, height]");
    }
    const double x = bb[0].get<double>(), y = bb[1].get<double>();
    const double w = bb[2].get<double>(), h = bb[3].get<double>();
    if (!(w > 0.0 && h > 0.0)) {
      throw ParseError(where + ": bbox width and height must be positive");
    }
    const auto it = img_index.find(image_id);
    if (it == img_index.end()) {
      throw ParseError(where + ": dangling image_id " + std::to_string(image_id));
    }
    const auto ct = cat_index.find(cat);
    if (ct == cat_index.end()) {
      throw ParseError(where + ": unknown category_id " + std::to_string(cat));
    }
    Box b{x + 0.5 * w, y + 0.5 * h, w, h, ct->second, 1.0};
    ds.images[it->second].boxes.push_back(b);
  }
  return ds;
}

Dataset load_coco_annotations(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open annotation file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  Dataset ds = parse_coco(ss.str());
  ds.image_root = path.parent_path() / "images";
  return ds;
}

std::string export_coco(const Dataset& ds) {
  json images = json::array(), anns = json::array(), cats = json::array();
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    const std::int64_t id = c < ds.category_ids.size()
                                ? ds.category_ids[c]
                                : static_cast<std::int64_t>(c) + 1;
    cats.push_back({{"id", id}, {"name", ds.class_names[c]}});
  }
  std::int64_t ann_id = 1;
  for (const auto& im : ds.images) {
    images.push_back({{"id", im.id},
                      {"file_name", im.file_name},
                      {"width", im.width},
                      {"height", im.height}});
    for (const Box& b : im.boxes) {
      const std::int64_t cat = static_cast<std::size_t>(b.class_id) < ds.category_ids.size()
                                   ? ds.category_ids[static_cast<std::size_t>(b.class_id)]
                                   : b.class_id + 1;
      anns.push_back({{"id", ann_id++},
                      {"image_id", im.id},
                      {"category_id", cat},
                      {"bbox", {b.x1(), b.y1(), b.w, b.h}},
                      {"area", b.w * b.h},
                      {"iscrowd", 0}});
    }
  }
  json root{{"images", images}, {"annotations", anns}, {"categories", cats}};
  return root.dump(1);
}

void write_coco(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << export_coco(ds) << '\n';
}

}  // namespace ssod
