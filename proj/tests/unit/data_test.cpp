// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssodlab/coco.hpp"
#include "ssodlab/errors.hpp"
#include "ssodlab/image.hpp"
#include "ssodlab/split.hpp"
#include "ssodlab/synthetic.hpp"

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ssodlab_data_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const char* kMinimal = R"({
  "images": [{"id": 7, "file_name": "a.ppm", "width": 64, "height": 64},
             {"id": 3, "file_name": "b.ppm", "width": 64, "height": 64}],
  "annotations": [{"id": 1, "image_id": 7, "category_id": 12, "bbox": [10, 20, 30, 40]},
                  {"id": 2, "image_id": 3, "category_id": 5, "bbox": [0.5, 1, 2, 3]}],
  "categories": [{"id": 12, "name": "square"}, {"id": 5, "name": "disc"}]
})";

TEST(Coco, MinimalFile) {
  const auto ds = ssod::parse_coco(kMinimal);
  ASSERT_EQ(ds.images.size(), 2u);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"disc", "square"}));
  EXPECT_EQ(ds.category_ids, (std::vector<std::int64_t>{5, 12}));
  const auto& b = ds.images[ds.index_of(7)].boxes.at(0);
  EXPECT_EQ(b, (ssod::Box{25, 40, 30, 40, 1, 1.0}));
  EXPECT_EQ(ds.ground_truth(ds.index_of(3)).image_id, 3);
  EXPECT_THROW(ds.index_of(99), ssod::OutOfBoundsError);
}

TEST(Coco, RoundTrip) {
  const auto ds = ssod::parse_coco(kMinimal);
  const auto again = ssod::parse_coco(ssod::export_coco(ds));
  EXPECT_EQ(again.class_names, ds.class_names);
  EXPECT_EQ(again.category_ids, ds.category_ids);
  ASSERT_EQ(again.images.size(), ds.images.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    ASSERT_EQ(again.images[i].boxes.size(), ds.images[i].boxes.size());
    EXPECT_EQ(again.images[i].id, ds.images[i].id);
    for (std::size_t k = 0; k < ds.images[i].boxes.size(); ++k) {
      const auto& a = again.images[i].boxes[k];
      const auto& b = ds.images[i].boxes[k];
      EXPECT_NEAR(a.cx, b.cx, 1e-6);
      EXPECT_NEAR(a.cy, b.cy, 1e-6);
      EXPECT_NEAR(a.w, b.w, 1e-6);
      EXPECT_NEAR(a.h, b.h, 1e-6);
      EXPECT_EQ(a.class_id, b.class_id);
    }
  }
}

TEST(Coco, ParseErrors) {
  EXPECT_THROW(ssod::parse_coco("{not json"), ssod::ParseError);
  EXPECT_THROW(ssod::parse_coco(R"({"images": [], "annotations": []})"), ssod::ParseError);
  const auto with_ann = [](const std::string& ann) {
    return std::string(R"({"images": [{"id": 1}], "categories": [{"id": 1}], "annotations": [)") +
           ann + "]}";
  };
  EXPECT_NO_THROW(ssod::parse_coco(with_ann(R"({"image_id": 1, "category_id": 1, "bbox": [0, 0, 1, 1]})")));
  EXPECT_THROW(ssod::parse_coco(with_ann(R"({"image_id": 2, "category_id": 1, "bbox": [0, 0, 1, 1]})")),
               ssod::ParseError);
  EXPECT_THROW(ssod::parse_coco(with_ann(R"({"image_id": 1, "category_id": 9, "bbox": [0, 0, 1, 1]})")),
               ssod::ParseError);
  EXPECT_THROW(ssod::parse_coco(with_ann(R"({"image_id": 1, "category_id": 1, "bbox": [0, 0, 1]})")),
               ssod::ParseError);
  EXPECT_THROW(ssod::parse_coco(with_ann(R"({"image_id": 1, "category_id": 1, "bbox": [0, 0, 0, 1]})")),
               ssod::ParseError);
  EXPECT_THROW(ssod::parse_coco(with_ann(R"({"image_id": 1, "bbox": [0, 0, 1, 1]})")),
               ssod::ParseError);
  EXPECT_THROW(ssod::load_coco_annotations("/nonexistent/annotations.json"), ssod::ParseError);
}

ssod::Dataset synthetic_meta(int n) {
  ssod::SyntheticSceneSpec spec;
  return ssod::render_dataset(spec, n, 5).meta;
}

TEST(Split, FullLabelling) {
  const auto ds = synthetic_meta(50);
  ssod::SplitOptions o;
  o.labeled_pct = 100.0;
  const auto m = ssod::make_split(ds, o);
  EXPECT_TRUE(m.unlabeled.empty());
  EXPECT_EQ(m.labeled.size() + m.validation.size(), 50u);
}

TEST(Split, OnePercentOfTwoThousand) {
  ssod::Dataset ds;
  ds.class_names = {"a", "b", "c"};
  for (int i = 0; i < 2000; ++i) {
    ssod::DatasetImage im;
    im.id = i;
    im.boxes.push_back(ssod::Box{10, 10, 4, 4, i % 3, 1.0});
    ds.images.push_back(im);
  }
  ssod::SplitOptions o;
  o.labeled_pct = 1.0;
  o.val_count = 0;
  const auto m = ssod::make_split(ds, o);
  EXPECT_EQ(m.labeled.size(), 20u);
  EXPECT_EQ(m.unlabeled.size(), 1980u);
  std::set<std::int64_t> all(m.labeled.begin(), m.labeled.end());
  all.insert(m.unlabeled.begin(), m.unlabeled.end());
  EXPECT_EQ(all.size(), 2000u);
  EXPECT_EQ(ssod::make_split(ds, o), m);
}

TEST(Split, FoldsDifferAndValidationIsShared) {
  const auto ds = synthetic_meta(200);
  std::set<std::vector<std::int64_t>> labeled_sets;
  std::vector<std::int64_t> val;
  for (std::uint64_t f = 0; f < 5; ++f) {
    ssod::SplitOptions o;
    o.labeled_pct = 10.0;
    o.fold_seed = f;
    const auto m = ssod::make_split(ds, o);
    EXPECT_EQ(m.validation.size(), 20u);
    if (f == 0) val = m.validation;
    EXPECT_EQ(m.validation, val);
    labeled_sets.insert(m.labeled);
    for (auto id : m.labeled)
      EXPECT_EQ(std::find(m.validation.begin(), m.validation.end(), id), m.validation.end());
  }
  EXPECT_EQ(labeled_sets.size(), 5u);
}

TEST(Split, Errors) {
  const auto ds = synthetic_meta(10);
  ssod::SplitOptions o;
  o.labeled_pct = 0.0;
  EXPECT_THROW(ssod::make_split(ds, o), ssod::ConfigError);
  o.labeled_pct = 5.0;
  o.val_count = 10;
  EXPECT_THROW(ssod::make_split(ds, o), ssod::ConfigError);
}

TEST(Split, JsonRoundTrip) {
  const auto m = ssod::make_split(synthetic_meta(30), {});
  const nlohmann::json j = m;
  EXPECT_EQ(j.get<ssod::SplitManifest>(), m);
}

TEST(Synthetic, SceneDeterministicAndInBounds) {
  ssod::SyntheticSceneSpec spec;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = ssod::render_scene(spec, seed);
    const auto b = ssod::render_scene(spec, seed);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.boxes, b.boxes);
    EXPECT_GE(a.boxes.size(), 1u);
    for (const auto& box : a.boxes) {
      EXPECT_GE(box.x1(), 0.0);
      EXPECT_GE(box.y1(), 0.0);
      EXPECT_LE(box.x2(), 64.0);
      EXPECT_LE(box.y2(), 64.0);
      EXPECT_GE(box.class_id, 0);
      EXPECT_LT(box.class_id, 3);
    }
    for (float v : a.image.data) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Synthetic, ShiftedDomainChangesPixelsNotBoxes) {
  ssod::SyntheticSceneSpec spec;
  const auto a = ssod::render_scene(spec, 3);
  const auto b = ssod::render_scene(spec.shifted(), 3);
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_NE(a.image, b.image);
}

TEST(Synthetic, GenDataIsByteIdentical) {
  ssod::SyntheticSceneSpec spec;
  const auto d1 = scratch("gen1");
  const auto d2 = scratch("gen2");
  ssod::gen_synthetic_dataset(spec, 10, 42, d1);
  ssod::gen_synthetic_dataset(spec, 10, 42, d2);
  EXPECT_EQ(slurp(d1 / "annotations.json"), slurp(d2 / "annotations.json"));
  EXPECT_EQ(slurp(d1 / "manifest.json"), slurp(d2 / "manifest.json"));
  for (const auto& e : fs::directory_iterator(d1 / "images"))
    EXPECT_EQ(slurp(e.path()), slurp(d2 / "images" / e.path().filename()));

  const auto loaded = ssod::load_dataset(d1 / "annotations.json");
  ASSERT_EQ(loaded.images.size(), 10u);
  const auto mem = ssod::render_dataset(spec, 10, 42);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_GE(loaded.meta.images[i].boxes.size(), 1u);
    EXPECT_EQ(loaded.images[i], mem.images[i]);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Image, PpmRoundTripOfQuantizedImage) {
  ssod::Image img(5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 17) / 16.0f;
  ssod::quantize(img);
  const auto dir = scratch("ppm");
  ssod::write_ppm(img, dir / "x.ppm");
  EXPECT_EQ(ssod::read_ppm(dir / "x.ppm"), img);
  fs::remove_all(dir);
}

TEST(Image, TensorConversion) {
  ssod::Image img(4, 2, 0.25f);
  img.at(3, 1, 2) = 0.75f;
  const std::vector<ssod::Image> v{img, img};
  const auto t = ssod::images_to_tensor(v);
  EXPECT_EQ(t.n(), 2);
  EXPECT_EQ(t.c(), 3);
  EXPECT_EQ(t.h(), 2);
  EXPECT_EQ(t.w(), 4);
  // Pixels are centred on zero.
  EXPECT_EQ(t.at(1, 2, 1, 3), 0.25);
  EXPECT_EQ(t.at(0, 0, 0, 0), -0.25);
  EXPECT_EQ(ssod::tensor_to_image(t, 1), img);
}

}  // namespace
