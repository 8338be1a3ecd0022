#include <random>

#include <gtest/gtest.h>

#include "wheatdet/core.hpp"

using namespace wheatdet;

TEST(Box, RejectsDegenerate)
{
  EXPECT_THROW(Box(0, 0, 0, 5), std::invalid_argument);
  EXPECT_THROW(Box(0, 5, 5, 5), std::invalid_argument);
  EXPECT_THROW(Box(3, 0, 1, 5), std::invalid_argument);
  EXPECT_THROW(Box(0, 0, 1.5, 0.5, Space::normalized), std::invalid_argument);
  EXPECT_NO_THROW(Box(0, 0, 1, 1, Space::normalized));
}

TEST(Detection, ScoreRange)
{
  EXPECT_THROW(Detection(Box(0, 0, 1, 1), 1.01), std::invalid_argument);
  EXPECT_THROW(Detection(Box(0, 0, 1, 1), -0.1), std::invalid_argument);
  EXPECT_NO_THROW(Detection(Box(0, 0, 1, 1), 0.0));
}

TEST(Iou, Examples)
{
  EXPECT_DOUBLE_EQ(iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)), 1.0);
  EXPECT_DOUBLE_EQ(iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)), 0.0);
  // intersection 1, union 4 + 4 - 1
  EXPECT_NEAR(iou(Box(0, 0, 2, 2), Box(1, 1, 3, 3)), 1.0 / 7.0, 1e-15);
  // touching edges
  EXPECT_DOUBLE_EQ(iou(Box(0, 0, 1, 1), Box(1, 0, 2, 1)), 0.0);
}

TEST(Iou, MixedSpacesRejected)
{
  EXPECT_THROW(iou(Box(0, 0, 1, 1), Box(0, 0, 0.5, 0.5, Space::normalized)), std::invalid_argument);
}

TEST(Iou, Properties)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  auto rand_box = [&]() {
      double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
      if (a == b) {b += 1;}
      if (c == d) {d += 1;}
      return Box(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
    };
  for (int i = 0; i < 5000; ++i) {
    const Box a = rand_box();
    const Box b = rand_box();
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(iou(a, a), 1.0);
  }
}

TEST(Area, Examples)
{
  EXPECT_DOUBLE_EQ(area(Box(0, 0, 10, 10)), 100.0);
  EXPECT_DOUBLE_EQ(area(Box(0, 0, 1, 1)), 1.0);
  EXPECT_DOUBLE_EQ(area(Box(2, 3, 4, 9)), 12.0);
}

TEST(Normalize, Examples)
{
  EXPECT_EQ(normalize(Box(0, 0, 512, 512), 512, 512), Box(0, 0, 1, 1, Space::normalized));
  EXPECT_EQ(normalize(Box(256, 128, 512, 256), 512, 512),
    Box(0.5, 0.25, 1.0, 0.5, Space::normalized));
  EXPECT_EQ(denormalize(Box(0.5, 0.25, 1.0, 0.5, Space::normalized), 1024, 1024),
    Box(512, 256, 1024, 512));
}

TEST(Normalize, Errors)
{
  EXPECT_THROW(normalize(Box(0, 0, 1, 1), 0, 10), std::invalid_argument);
  EXPECT_THROW(normalize(Box(0, 0, 1, 1), 10, -1), std::invalid_argument);
  EXPECT_THROW(denormalize(Box(0, 0, 1, 1), 10, 10), std::invalid_argument);
  EXPECT_THROW(normalize(Box(0, 0, 0.5, 0.5, Space::normalized), 10, 10), std::invalid_argument);
}

TEST(Normalize, RoundTrip)
{
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 4096);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const int w = dim(rng);
    const int h = dim(rng);
    double a = u(rng) * w, b = u(rng) * w, c = u(rng) * h, d = u(rng) * h;
    if (a == b || c == d) {
      continue;
    }
    const Box box(std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d));
    const Box back = denormalize(normalize(box, w, h), w, h);
    EXPECT_NEAR(back.x1(), box.x1(), 1e-9);
    EXPECT_NEAR(back.y1(), box.y1(), 1e-9);
    EXPECT_NEAR(back.x2(), box.x2(), 1e-9);
    EXPECT_NEAR(back.y2(), box.y2(), 1e-9);
  }
}

TEST(Clip, Examples)
{
  EXPECT_EQ(clip(Box(10, 10, 20, 20), 100, 100), Box(10, 10, 20, 20));
  EXPECT_EQ(clip(Box(90, 90, 120, 120), 100, 100), Box(90, 90, 100, 100));
  EXPECT_FALSE(clip(Box(110, 110, 120, 120), 100, 100).has_value());
  EXPECT_FALSE(clip(Box(100, 0, 120, 10), 100, 100).has_value());
}

TEST(Dataset, Validation)
{
  Dataset d;
  d.records.push_back({"a", 10, 10, "s", {Box(0, 0, 5, 5)}});
  d.records.push_back({"a", 10, 10, "s", {}});
  EXPECT_THROW(validate(d), std::invalid_argument);
  d.records[1].image_id = "b";
  EXPECT_NO_THROW(validate(d));
  d.records[1].boxes.push_back(Box(5, 5, 11, 6));
  EXPECT_THROW(validate(d), std::invalid_argument);
}
