// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ssodlab/errors.hpp"
#include "ssodlab/geometry.hpp"

namespace {

using ssod::Box;

Box box(double cx, double cy, double w, double h, int cls = 0, double score = 1.0) {
  return Box{cx, cy, w, h, cls, score};
}

// Pixel-count IoU on an integer raster; only exact for boxes with integer
// corners.
double raster_iou(const Box& a, const Box& b) {
  int inter = 0, uni = 0;
  for (int y = -50; y < 200; ++y) {
    for (int x = -50; x < 200; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const bool ia = px > a.x1() && px < a.x2() && py > a.y1() && py < a.y2();
      const bool ib = px > b.x1() && px < b.x2() && py > b.y1() && py < b.y2();
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(ssod::iou(box(5, 5, 10, 10), box(5, 5, 10, 10)), 1.0);
  EXPECT_DOUBLE_EQ(ssod::iou(box(5, 5, 10, 10), box(100, 100, 10, 10)), 0.0);
  EXPECT_NEAR(ssod::iou(box(5, 5, 10, 10), box(10, 5, 10, 10)), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(raster_iou(box(5, 5, 10, 10), box(10, 5, 10, 10)), 1.0 / 3.0);
}

TEST(Iou, DegenerateIsZero) {
  EXPECT_EQ(ssod::iou(box(5, 5, 0, 0), box(5, 5, 0, 0)), 0.0);
  EXPECT_EQ(ssod::iou(box(5, 5, 0, 10), box(5, 5, 10, 10)), 0.0);
}

TEST(Iou, SymmetricBoundedAndMatchesOracle) {
  ssod::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Box a = fixture::random_box(rng), b = fixture::random_box(rng);
    const double v = ssod::iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v, ssod::iou(b, a));
    EXPECT_NEAR(v, oracle::iou(a, b), 1e-12);
  }
}

TEST(Iou, IntegerBoxesMatchRaster) {
  ssod::Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const double x1 = rng.uniform_int(0, 40), y1 = rng.uniform_int(0, 40);
    const double x2 = x1 + rng.uniform_int(1, 30), y2 = y1 + rng.uniform_int(1, 30);
    const double u1 = rng.uniform_int(0, 40), v1 = rng.uniform_int(0, 40);
    const double u2 = u1 + rng.uniform_int(1, 30), v2 = v1 + rng.uniform_int(1, 30);
    const Box a = Box::from_corners(x1, y1, x2, y2), b = Box::from_corners(u1, v1, u2, v2);
    EXPECT_NEAR(ssod::iou(a, b), raster_iou(a, b), 1e-12);
  }
}

TEST(Ciou, IdentityIsZero) {
  const Box b = box(20, 30, 12, 7);
  EXPECT_NEAR(ssod::ciou_loss(b, b), 0.0, 1e-15);
}

TEST(Ciou, ConcentricSameAspectIsOneMinusIou) {
  const Box gt = box(32, 32, 20, 10);
  const Box pred = box(32, 32, 10, 5);
  EXPECT_NEAR(ssod::ciou_loss(pred, gt), 1.0 - ssod::iou(pred, gt), 1e-15);
  EXPECT_NEAR(ssod::ciou_loss(pred, gt), 0.75, 1e-15);
}

TEST(Ciou, DisjointMatchesOracle) {
  const Box p = box(10, 10, 4, 6), g = box(40, 50, 8, 3);
  EXPECT_NEAR(ssod::ciou_loss(p, g), oracle::ciou(p, g), 1e-8);
  EXPECT_GT(ssod::ciou_loss(p, g), 1.0);
}

TEST(Ciou, NonNegativeOnRandomPairs) {
  ssod::Rng rng(3);
  for (int i = 0; i < 5000; ++i) {
    const Box a = fixture::random_box(rng), b = fixture::random_box(rng);
    EXPECT_GE(ssod::ciou_loss(a, b), 0.0);
    EXPECT_NEAR(ssod::ciou_loss(a, b), oracle::ciou(a, b), 1e-8);
  }
}

TEST(Nms, Examples) {
  ssod::DetectionSet empty;
  EXPECT_TRUE(ssod::nms(empty, 0.5, 0.1).boxes.empty());

  ssod::DetectionSet one{0, {box(5, 5, 4, 4, 0, 0.7)}};
  EXPECT_EQ(ssod::nms(one, 0.5, 0.1).boxes.size(), 1u);

  ssod::DetectionSet two{0, {box(5, 5, 4, 4, 0, 0.8), box(5, 5, 4, 4, 0, 0.9)}};
  const auto kept = ssod::nms(two, 0.5, 0.1);
  ASSERT_EQ(kept.boxes.size(), 1u);
  EXPECT_EQ(kept.boxes[0].score, 0.9);
}

TEST(Nms, ClassWise) {
  ssod::DetectionSet d{0, {box(5, 5, 4, 4, 0, 0.8), box(5, 5, 4, 4, 1, 0.9)}};
  EXPECT_EQ(ssod::nms(d, 0.5, 0.1).boxes.size(), 2u);
}

TEST(Nms, RandomMatchesBruteForce) {
  ssod::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    ssod::DetectionSet d;
    for (int i = 0; i < 20; ++i) d.boxes.push_back(fixture::random_box(rng, 40, 4, 20, 2));
    const double thr = rng.uniform(0.2, 0.8), sthr = rng.uniform(0.0, 0.5);
    const auto got = ssod::nms_indices(d, thr, sthr);
    const auto want = oracle::nms(d.boxes, thr, sthr);
    EXPECT_EQ(got, want);
    // Survivors of one class never overlap beyond the threshold.
    for (std::size_t i = 0; i < got.size(); ++i)
      for (std::size_t j = i + 1; j < got.size(); ++j)
        if (d.boxes[got[i]].class_id == d.boxes[got[j]].class_id)
          EXPECT_LE(ssod::iou(d.boxes[got[i]], d.boxes[got[j]]), thr);
  }
}

TEST(Nms, RejectsBadThresholds) {
  ssod::DetectionSet d;
  EXPECT_THROW(ssod::nms(d, 1.5, 0.1), ssod::ConfigError);
}

TEST(GridEncoding, AlignedCase) {
  const ssod::AnchorSize an{12, 12};
  const auto e = ssod::encode_box_to_grid(box(20, 20, 12, 12), 8, an, 64, 64);
  EXPECT_EQ(e.gx, 2);
  EXPECT_EQ(e.gy, 2);
  EXPECT_EQ(e.dx, 0.0);
  EXPECT_EQ(e.dy, 0.0);
  EXPECT_EQ(e.sw, 1.0);
  EXPECT_EQ(e.sh, 1.0);
}

TEST(GridEncoding, RoundTrip) {
  ssod::Rng rng(8);
  const ssod::AnchorSize an{10, 20};
  for (int i = 0; i < 1000; ++i) {
    Box b = fixture::random_box(rng, 64, 1, 40, 3);
    const auto e = ssod::encode_box_to_grid(b, 16, an, 64, 64);
    const Box r = ssod::decode_grid(e, 16, an, b.class_id, b.score);
    EXPECT_NEAR(r.cx, b.cx, 1e-6);
    EXPECT_NEAR(r.cy, b.cy, 1e-6);
    EXPECT_NEAR(r.w, b.w, 1e-6);
    EXPECT_NEAR(r.h, b.h, 1e-6);
  }
}

TEST(GridEncoding, EdgeIsClampedAndRoundTrips) {
  const ssod::AnchorSize an{8, 8};
  const Box b = box(64, 64, 6, 6);
  const auto e = ssod::encode_box_to_grid(b, 8, an, 64, 64);
  EXPECT_EQ(e.gx, 7);
  EXPECT_EQ(e.gy, 7);
  EXPECT_DOUBLE_EQ(e.dx, 0.5);
  const Box r = ssod::decode_grid(e, 8, an);
  EXPECT_NEAR(r.cx, 64, 1e-12);
  EXPECT_NEAR(r.cy, 64, 1e-12);
}

TEST(GridEncoding, Errors) {
  const ssod::AnchorSize an{8, 8};
  EXPECT_THROW(ssod::encode_box_to_grid(box(70, 5, 4, 4), 8, an, 64, 64),
               ssod::OutOfBoundsError);
  EXPECT_THROW(ssod::encode_box_to_grid(box(5, 5, 4, 4), 7, an, 64, 64), ssod::ShapeError);
}

TEST(Logits, OffsetAndScaleInverse) {
  for (double o : {-0.9, -0.3, 0.0, 0.4, 0.99}) {
    EXPECT_NEAR(ssod::offset_from_logit(ssod::logit_from_offset(o)), o, 1e-12);
  }
  for (double s : {0.05, 0.5, 1.0, 2.5, 3.9}) {
    EXPECT_NEAR(ssod::scale_from_logit(ssod::logit_from_scale(s)), s, 1e-12);
  }
  EXPECT_EQ(ssod::scale_from_logit(0.0), 1.0);
  EXPECT_EQ(ssod::offset_from_logit(0.0), 0.0);
}

TEST(ClipBox, StaysInside) {
  const Box c = ssod::clip_box(box(2, 60, 10, 10, 1, 0.3), 64, 64);
  EXPECT_DOUBLE_EQ(c.x1(), 0.0);
  EXPECT_DOUBLE_EQ(c.y2(), 64.0);
  EXPECT_EQ(c.class_id, 1);
  EXPECT_EQ(c.score, 0.3);
}

}  // namespace
