#include <random>
#include <set>

#include <gtest/gtest.h>

#include "wheatdet/augment.hpp"
#include "wheatdet/protocol.hpp"

using namespace wheatdet;

namespace
{

Image random_image(int w, int h, std::mt19937_64& rng, int lo = 0, int hi = 255)
{
  Image img(w, h);
  std::uniform_int_distribution<int> v(lo, hi);
  for (auto& p : img.pixels()) {
    p = static_cast<std::uint8_t>(v(rng));
  }
  return img;
}

double mean_value(const Image& img)
{
  double s = 0.0;
  for (auto p : img.pixels()) {
    s += p;
  }
  return s / static_cast<double>(img.pixels().size());
}

void expect_boxes_in_frame(const std::vector<Box>& boxes, const Image& img)
{
  for (const auto& b : boxes) {
    EXPECT_GE(b.x1(), 0.0);
    EXPECT_GE(b.y1(), 0.0);
    EXPECT_LE(b.x2(), img.width());
    EXPECT_LE(b.y2(), img.height());
  }
}

}  // namespace

TEST(Policy, G1EntriesFieldByField)
{
  const auto g1 = policy_g1();
  EXPECT_EQ(g1.name, "G1");
  const std::vector<std::pair<AugKind, double>> expected{
    {AugKind::crop_resize, 0.5}, {AugKind::hue_saturation, 0.8}, {AugKind::to_gray, 0.01},
    {AugKind::hflip, 0.5}, {AugKind::vflip, 0.5}, {AugKind::cutout, 0.5}};
  ASSERT_EQ(g1.entries.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(g1.entries[i].op.kind, expected[i].first) << i;
    EXPECT_EQ(g1.entries[i].probability, expected[i].second) << i;
  }
  EXPECT_EQ(g1.entries[5].op.params.holes, 8);
  EXPECT_NO_THROW(g1.validate());
}

TEST(Policy, G2EntriesFieldByField)
{
  const auto g2 = policy_g2();
  EXPECT_EQ(g2.name, "G2");
  const std::vector<std::pair<AugKind, double>> expected{
    {AugKind::crop_resize, 0.2}, {AugKind::hue_saturation, 0.8},
    {AugKind::brightness_contrast, 0.8}, {AugKind::to_gray, 0.01},
    {AugKind::gaussian_noise, 0.01}, {AugKind::hflip, 0.4}, {AugKind::vflip, 0.4},
    {AugKind::rot90, 0.4}, {AugKind::cutout, 0.4}, {AugKind::cutout, 0.4},
    {AugKind::motion_blur, 0.3}, {AugKind::shadow, 0.3}};
  ASSERT_EQ(g2.entries.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(g2.entries[i].op.kind, expected[i].first) << i;
    EXPECT_EQ(g2.entries[i].probability, expected[i].second) << i;
  }
  EXPECT_EQ(g2.entries[8].op.params.holes, 8);
  EXPECT_EQ(g2.entries[9].op.params.holes, 10);
  EXPECT_NO_THROW(g2.validate());
}

TEST(Policy, BuiltinNames)
{
  EXPECT_EQ(builtin_policy("G1").entries, policy_g1().entries);
  EXPECT_EQ(builtin_policy("G2").entries, policy_g2().entries);
  EXPECT_THROW(builtin_policy("G3"), std::invalid_argument);
}

TEST(Policy, ParamValidation)
{
  AugmentationOp op = cutout_op(0);
  EXPECT_THROW(op.validate(), std::invalid_argument);
  op = {AugKind::gaussian_noise};
  op.params.sigma_min = -1.0;
  EXPECT_THROW(op.validate(), std::invalid_argument);
  op = {AugKind::crop_resize};
  op.params.crop_max = 1.5;
  EXPECT_THROW(op.validate(), std::invalid_argument);
  op.params.crop_max = 1.0;
  op.params.crop_min = 0.0;
  EXPECT_THROW(op.validate(), std::invalid_argument);
  AugmentationPolicy bad{"bad", {{{AugKind::hflip}, 1.2}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Sample, DegenerateProbabilities)
{
  std::mt19937_64 rng(1);
  auto none = policy_g2();
  auto all = policy_g2();
  for (auto& e : none.entries) {
    e.probability = 0.0;
  }
  for (auto& e : all.entries) {
    e.probability = 1.0;
  }
  for (int i = 0; i < 200; ++i) {
    EXPECT_TRUE(sample(none, rng).empty());
    const auto ops = sample(all, rng);
    ASSERT_EQ(ops.size(), all.entries.size());
    for (std::size_t k = 0; k < ops.size(); ++k) {
      EXPECT_EQ(ops[k], all.entries[k].op);
    }
  }
}

TEST(Sample, InclusionFrequencies)
{
  for (const auto& policy : {policy_g1(), policy_g2()}) {
    std::mt19937_64 rng(20200);
    const int draws = 100000;
    std::vector<int> hits(policy.entries.size(), 0);
    for (int i = 0; i < draws; ++i) {
      // Each included op is matched back to its entry by walking in order.
      const auto ops = sample(policy, rng);
      std::size_t e = 0;
      for (const auto& op : ops) {
        while (!(policy.entries[e].op == op)) {
          ++e;
        }
        ++hits[e++];
      }
    }
    for (std::size_t e = 0; e < hits.size(); ++e) {
      EXPECT_NEAR(hits[e] / static_cast<double>(draws), policy.entries[e].probability, 0.01)
        << policy.name << " entry " << e;
    }
  }
}

TEST(Sample, Deterministic)
{
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample(policy_g2(), a), sample(policy_g2(), b));
  }
}

TEST(Apply, EmptyOpsIsIdentity)
{
  std::mt19937_64 rng(3);
  const Image img = random_image(40, 30, rng);
  const std::vector<Box> boxes{Box(1.5, 2.25, 10.75, 20), Box(0, 0, 40, 30)};
  const auto out = apply({}, img, boxes, rng);
  EXPECT_EQ(out.image, img);
  EXPECT_EQ(out.boxes, boxes);
}

TEST(Apply, HflipMovesBox)
{
  std::mt19937_64 rng(3);
  const auto out = apply({{AugKind::hflip}}, Image(100, 100), {Box(10, 20, 30, 40)}, rng);
  ASSERT_EQ(out.boxes.size(), 1u);
  EXPECT_EQ(out.boxes[0], Box(70, 20, 90, 40));
}

TEST(Apply, VflipAndRot90KeepBoxesConsistent)
{
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Image img(60, 40, 0);
    // Mark the box interior so the pixel content can be checked against the moved box.
    const Box b(12, 8, 30, 20);
    for (int y = 8; y < 20; ++y) {
      for (int x = 12; x < 30; ++x) {
        img.at(x, y, 0) = 255;
      }
    }
    const AugKind kind = trial % 2 == 0 ? AugKind::vflip : AugKind::rot90;
    const auto out = apply({{kind}}, img, {b}, rng);
    ASSERT_EQ(out.boxes.size(), 1u);
    const Box& m = out.boxes[0];
    expect_boxes_in_frame(out.boxes, out.image);
    int marked = 0;
    for (int y = 0; y < out.image.height(); ++y) {
      for (int x = 0; x < out.image.width(); ++x) {
        const bool inside = x + 0.5 > m.x1() && x + 0.5 < m.x2() && y + 0.5 > m.y1() &&
          y + 0.5 < m.y2();
        EXPECT_EQ(out.image.at(x, y, 0) == 255, inside);
        marked += inside;
      }
    }
    EXPECT_EQ(marked, 18 * 12);
  }
}

TEST(Apply, CutoutFillsExactlyTheSampledHoles)
{
  for (int holes : {8, 10}) {
    std::mt19937_64 rng(11 + holes);
    const Image img = random_image(200, 160, rng, 1, 255);
    const std::vector<Box> boxes{Box(10, 10, 50, 50), Box(100, 20, 180, 150)};
    const AugmentationOp op = cutout_op(holes);

    std::mt19937_64 a(99), b(99);
    const auto out = apply({op}, img, boxes, a);
    const auto rects = sample_cutout_holes(img.width(), img.height(), op.params, b);
    ASSERT_EQ(rects.size(), static_cast<std::size_t>(holes));
    EXPECT_EQ(out.boxes, boxes);

    std::set<std::pair<int, int>> covered;
    for (const auto& r : rects) {
      EXPECT_GE(r.x1 - r.x0, static_cast<int>(0.05 * img.width()));
      EXPECT_LE(r.x1 - r.x0, static_cast<int>(0.10 * img.width()) + 1);
      EXPECT_GE(r.x0, 0);
      EXPECT_LE(r.x1, img.width());
      for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
          covered.insert({x, y});
        }
      }
    }
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const bool hole = covered.count({x, y}) > 0;
        for (int c = 0; c < Image::channels; ++c) {
          if (hole) {
            ASSERT_EQ(out.image.at(x, y, c), 0);
          } else {
            ASSERT_EQ(out.image.at(x, y, c), img.at(x, y, c));
          }
        }
      }
    }
  }
}

TEST(Apply, RandomEraseFillsOneRectangle)
{
  std::mt19937_64 rng(5);
  const Image img = random_image(80, 80, rng, 1, 255);
  AugmentationOp op{AugKind::random_erase};
  op.params.fill = 0;
  std::mt19937_64 a(1), b(1);
  const auto out = apply({op}, img, {Box(0, 0, 10, 10)}, a);
  const PixelRect r = sample_erase_rect(80, 80, op.params, b);
  for (int y = 0; y < 80; ++y) {
    for (int x = 0; x < 80; ++x) {
      EXPECT_EQ(out.image.at(x, y, 1), r.contains(x, y) ? 0 : img.at(x, y, 1));
    }
  }
  EXPECT_EQ(out.boxes, std::vector<Box>{Box(0, 0, 10, 10)});
}

TEST(Apply, PhotometricOpsKeepBoxesBitIdentical)
{
  std::mt19937_64 rng(21);
  const Image img = random_image(64, 48, rng);
  const std::vector<Box> boxes{Box(0.1, 0.2, 12.3, 9.9), Box(30, 10, 64, 48)};
  for (AugKind k : {AugKind::hue_saturation, AugKind::brightness_contrast, AugKind::to_gray,
      AugKind::gaussian_noise, AugKind::motion_blur, AugKind::shadow, AugKind::cutout,
      AugKind::random_erase})
  {
    for (int i = 0; i < 10; ++i) {
      const auto out = apply({{k}}, img, boxes, rng);
      EXPECT_EQ(out.boxes, boxes) << to_string(k);
      EXPECT_EQ(out.image.width(), img.width());
      EXPECT_EQ(out.image.height(), img.height());
    }
  }
}

TEST(Apply, ToGrayEqualizesChannels)
{
  std::mt19937_64 rng(2);
  const auto out = apply({{AugKind::to_gray}}, random_image(16, 16, rng), {}, rng);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      EXPECT_EQ(out.image.at(x, y, 0), out.image.at(x, y, 1));
      EXPECT_EQ(out.image.at(x, y, 1), out.image.at(x, y, 2));
    }
  }
}

TEST(CropBoxes, ClipsAndDrops)
{
  // Window [50,100) x [0,50) of a 100x100 image, scaled back up to 100x100.
  const std::vector<Box> in{Box(60, 10, 70, 20), Box(0, 0, 10, 10), Box(45, 0, 55, 10),
    Box(0, 0, 52, 10)};
  const auto out = crop_boxes(in, 50, 0, 50, 50, 100, 100);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], Box(20, 20, 40, 40));
  // Half of the box survives: clipped, kept.
  EXPECT_EQ(out[1], Box(0, 0, 10, 20));
}

TEST(Apply, CropResizeNeverInventsBoxes)
{
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(0.0, 90.0), size(2.0, 40.0);
  AugmentationOp op{AugKind::crop_resize};
  op.params.crop_min = 0.3;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box> boxes;
    for (int i = 0; i < 6; ++i) {
      const double x = pos(rng), y = pos(rng);
      boxes.emplace_back(x, y, std::min(128.0, x + size(rng)), std::min(96.0, y + size(rng)));
    }
    const auto out = apply({op}, Image(128, 96), boxes, rng);
    EXPECT_LE(out.boxes.size(), boxes.size());
    EXPECT_EQ(out.image.width(), 128);
    EXPECT_EQ(out.image.height(), 96);
    expect_boxes_in_frame(out.boxes, out.image);
  }
}

TEST(Apply, EmptyCropThrows)
{
  std::mt19937_64 rng(1);
  AugmentationOp op{AugKind::crop_resize};
  op.params.crop_min = 0.001;
  op.params.crop_max = 0.001;
  EXPECT_THROW(apply({op}, Image(10, 10), {}, rng), std::invalid_argument);
}

TEST(Apply, RejectsBoxOutsideFrame)
{
  std::mt19937_64 rng(1);
  EXPECT_THROW(apply({}, Image(10, 10), {Box(5, 5, 11, 8)}, rng), std::invalid_argument);
}

TEST(Apply, FullPolicyIsDeterministicAndValid)
{
  std::mt19937_64 src(12);
  const Image img = random_image(96, 96, src);
  const std::vector<Box> boxes{Box(5, 5, 30, 30), Box(40, 50, 90, 95), Box(0, 60, 20, 96)};
  for (int trial = 0; trial < 40; ++trial) {
    std::mt19937_64 a(trial), b(trial);
    const auto ops_a = sample(policy_g2(), a);
    const auto ops_b = sample(policy_g2(), b);
    const auto out_a = apply(ops_a, img, boxes, a);
    const auto out_b = apply(ops_b, img, boxes, b);
    EXPECT_EQ(out_a.image, out_b.image);
    EXPECT_EQ(out_a.boxes, out_b.boxes);
    EXPECT_LE(out_a.boxes.size(), boxes.size());
    expect_boxes_in_frame(out_a.boxes, out_a.image);
  }
}

TEST(MotionBlur, Examples)
{
  Image row(5, 1);
  row.at(2, 0, 0) = 255;
  const Image out = motion_blur(row, 3, 0.0);
  const int expected[] = {0, 85, 85, 85, 0};
  for (int x = 0; x < 5; ++x) {
    EXPECT_EQ(out.at(x, 0, 0), expected[x]) << x;
    EXPECT_EQ(out.at(x, 0, 1), 0);
  }

  const Image flat(20, 20, 173);
  for (double angle : {0.0, 33.0, 90.0, 217.0}) {
    EXPECT_EQ(motion_blur(flat, 7, angle), flat);
  }
}

TEST(MotionBlur, VerticalAngleBlursColumns)
{
  Image col(1, 5);
  col.at(0, 2, 2) = 90;
  const Image out = motion_blur(col, 3, 90.0);
  const int expected[] = {0, 30, 30, 30, 0};
  for (int y = 0; y < 5; ++y) {
    EXPECT_EQ(out.at(0, y, 2), expected[y]) << y;
  }
}

TEST(MotionBlur, RejectsBadKernel)
{
  const Image img(5, 5);
  EXPECT_THROW(motion_blur(img, 4, 0.0), std::invalid_argument);
  EXPECT_THROW(motion_blur(img, 1, 0.0), std::invalid_argument);
}

TEST(MotionBlur, PreservesMean)
{
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = random_image(64, 64, rng);
    const Image out = motion_blur(img, 3 + 2 * (trial % 3), angle(rng));
    EXPECT_NEAR(mean_value(out), mean_value(img), 0.01 * mean_value(img));
  }
}

TEST(Shadow, Examples)
{
  const Image flat(30, 20, 200);
  const std::array<Point2, 4> cover{{{-1, -1}, {31, -1}, {31, 21}, {-1, 21}}};
  EXPECT_EQ(shadow(flat, cover, 0.5), Image(30, 20, 100));

  const std::array<Point2, 4> away{{{100, 100}, {120, 100}, {120, 130}, {100, 130}}};
  EXPECT_EQ(shadow(flat, away, 0.5), flat);
}

TEST(Shadow, OnlyPixelsInsideAreDimmed)
{
  std::mt19937_64 rng(6);
  const Image img = random_image(12, 12, rng);
  // Clockwise winding of the square [2,6] x [3,9].
  const std::array<Point2, 4> quad{{{2, 3}, {2, 9}, {6, 9}, {6, 3}}};
  const Image out = shadow(img, quad, 0.25);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      const bool inside = x >= 2 && x < 6 && y >= 3 && y < 9;
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(out.at(x, y, c), inside ? clamp_u8(img.at(x, y, c) * 0.25) : img.at(x, y, c));
      }
    }
  }
}

TEST(Shadow, RejectsDegenerateInput)
{
  const Image img(10, 10, 50);
  const std::array<Point2, 4> collinear{{{0, 0}, {1, 1}, {2, 2}, {3, 3}}};
  EXPECT_THROW(shadow(img, collinear, 0.5), std::invalid_argument);
  const std::array<Point2, 4> bowtie{{{0, 0}, {5, 5}, {5, 0}, {0, 5}}};
  EXPECT_THROW(shadow(img, bowtie, 0.5), std::invalid_argument);
  const std::array<Point2, 4> ok{{{0, 0}, {5, 0}, {5, 5}, {0, 5}}};
  EXPECT_THROW(shadow(img, ok, 1.0), std::invalid_argument);
  EXPECT_THROW(shadow(img, ok, 0.0), std::invalid_argument);
}

TEST(PolicyFile, ParsesOpsInOrder)
{
  const std::string text = R"({"name": "mine", "ops": [
    {"kind": "cutout", "probability": 0.25, "params": {"holes": 3, "fill": 7}},
    {"kind": "random_erase", "probability": 1.0},
    {"kind": "motion_blur", "probability": 0.1, "params": {"blur_min": 5, "blur_max": 9}}
  ]})";
  const auto p = parse_policy(text);
  EXPECT_EQ(p.name, "mine");
  ASSERT_EQ(p.entries.size(), 3u);
  EXPECT_EQ(p.entries[0].op.kind, AugKind::cutout);
  EXPECT_EQ(p.entries[0].op.params.holes, 3);
  EXPECT_EQ(p.entries[0].op.params.fill, 7);
  EXPECT_EQ(p.entries[0].probability, 0.25);
  EXPECT_EQ(p.entries[1].op.kind, AugKind::random_erase);
  EXPECT_EQ(p.entries[1].op.params, AugParams{});
  EXPECT_EQ(p.entries[2].op.params.blur_max, 9);
}

TEST(PolicyFile, RejectsBadDocuments)
{
  EXPECT_THROW(parse_policy(R"({"ops": [{"kind": "hflip", "probability": 0.5,
    "params": {"hols": 3}}]})"), FormatError);
  EXPECT_THROW(parse_policy(R"({"ops": [{"kind": "warp", "probability": 0.5}]})"), FormatError);
  EXPECT_THROW(parse_policy(R"({"ops": [{"kind": "hflip"}]})"), FormatError);
  EXPECT_THROW(parse_policy(R"({"ops": [{"kind": "hflip", "probability": 2}]})"),
    std::invalid_argument);
  EXPECT_THROW(parse_policy("not json"), FormatError);
}
