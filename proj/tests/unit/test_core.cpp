#include <gtest/gtest.h>

#include "airtrack/core.hpp"
#include "helpers.hpp"

namespace airtrack {
namespace {

using testing::random_box;

TEST(Iou, IdenticalBoxes) {
  const BoundingBox a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
}

TEST(Iou, DisjointBoxes) { EXPECT_EQ(iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0); }

TEST(Iou, HalfShiftedBoxes) {
  // intersection 5x10 = 50, union 100 + 100 - 50 = 150
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 50.0 / 150.0, 1e-15);
}

TEST(Iou, SymmetricAndBounded) {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_box(rng);
    const auto b = random_box(rng);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    if (!(a == b)) {
      EXPECT_LT(ab, 1.0);
    }
  }
}

TEST(BoundingBox, CenterIsExact) {
  const BoundingBox b{1.25, -3.5, 7.5, 2.25};
  EXPECT_EQ(b.center().x, 1.25 + 7.5 / 2.0);
  EXPECT_EQ(b.center().y, -3.5 + 2.25 / 2.0);
}

TEST(ResizeChip, SameSizeIsBitIdentical) {
  Rng rng(3);
  const Chip c = testing::random_chip(rng, 100, 100, 3);
  EXPECT_EQ(resize_chip(c, 100, 100), c);
}

TEST(ResizeChip, ConstantFieldStaysConstant) {
  const Chip c = Chip::filled(13, 7, 3, 0.5);
  for (auto [w, h] : {std::pair{1, 1}, {4, 9}, {100, 100}, {37, 2}}) {
    const Chip r = resize_chip(c, w, h);
    ASSERT_EQ(r.width(), w);
    ASSERT_EQ(r.height(), h);
    for (double v : r.pixels()) EXPECT_DOUBLE_EQ(v, 0.5);
  }
}

// Scalar bilinear reference with pixel-center alignment and edge clamping.
double bilinear_ref(const Chip& c, int row, int col, int ch, int tw, int th) {
  const double sx = (col + 0.5) * c.width() / tw - 0.5;
  const double sy = (row + 0.5) * c.height() / th - 0.5;
  const double cx = std::clamp(sx, 0.0, c.width() - 1.0);
  const double cy = std::clamp(sy, 0.0, c.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, c.width() - 1), y1 = std::min(y0 + 1, c.height() - 1);
  const double fx = cx - x0, fy = cy - y0;
  const double top = c.at(y0, x0, ch) * (1 - fx) + c.at(y0, x1, ch) * fx;
  const double bot = c.at(y1, x0, ch) * (1 - fx) + c.at(y1, x1, ch) * fx;
  return top * (1 - fy) + bot * fy;
}

TEST(ResizeChip, TwoByTwoMatchesScalarBilinear) {
  const Chip c(2, 2, 1, {0.0, 1.0, 0.0, 1.0});
  const Chip r = resize_chip(c, 4, 4);
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col) EXPECT_NEAR(r.at(row, col, 0), bilinear_ref(c, row, col, 0, 4, 4), 1e-15);
  // columns interpolate 0 -> 1, rows are identical
  EXPECT_DOUBLE_EQ(r.at(0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(r.at(0, 1, 0), 0.25);
  EXPECT_DOUBLE_EQ(r.at(0, 2, 0), 0.75);
  EXPECT_DOUBLE_EQ(r.at(3, 3, 0), 1.0);
}

TEST(ResizeChip, RandomResizesMatchReferenceAndStayInRange) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Chip c = testing::random_chip(rng, static_cast<int>(rng.uniform_int(1, 20)),
                                       static_cast<int>(rng.uniform_int(1, 20)), 3);
    const int tw = static_cast<int>(rng.uniform_int(1, 30)), th = static_cast<int>(rng.uniform_int(1, 30));
    const Chip r = resize_chip(c, tw, th);
    for (int row = 0; row < th; ++row)
      for (int col = 0; col < tw; ++col)
        for (int ch = 0; ch < 3; ++ch) {
          const double v = r.at(row, col, ch);
          EXPECT_NEAR(v, bilinear_ref(c, row, col, ch, tw, th), 1e-12);
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
  }
}

TEST(Chip, RejectsBadPixelCounts) {
  EXPECT_THROW(Chip(2, 2, 3, std::vector<double>(5, 0.0)), Error);
  EXPECT_THROW(Chip(2, 2, 2), Error);
}

TEST(PlatformMeta, RangeChecks) {
  EXPECT_TRUE((PlatformMeta{10, 20, 0, 0, 1}).valid());
  EXPECT_FALSE((PlatformMeta{10, 95, 0, 0, 1}).valid());
  EXPECT_FALSE((PlatformMeta{-181, 0, 0, 0, 1}).valid());
  EXPECT_FALSE((PlatformMeta{0, 0, 0, 0, 0}).valid());
}

TEST(Tracklet, MissCountFollowsLastUpdate) {
  Tracklet t;
  t.add(testing::make_detection(3, 1, 0, 0));
  t.mark_missed(5);
  EXPECT_EQ(t.misses, 2);
  EXPECT_THROW(t.add(testing::make_detection(3, 2, 0, 0)), Error);
  t.add(testing::make_detection(6, 3, 0, 0));
  EXPECT_EQ(t.misses, 0);
  EXPECT_EQ(t.last_update_frame, 6);
}

}  // namespace
}  // namespace airtrack
