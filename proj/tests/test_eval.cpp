#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "random_instances.hpp"
#include "wheatdet/eval.hpp"

using namespace wheatdet;

namespace
{

std::vector<ImageEval> to_eval(const std::vector<oracle::Instance>& inst)
{
  std::vector<ImageEval> out;
  for (const auto& i : inst) {
    out.push_back({i.dets, i.gts});
  }
  return out;
}

}  // namespace

TEST(MatchImage, PerfectPredictions)
{
  const std::vector<Box> gts{Box(0, 0, 10, 10), Box(20, 20, 30, 30)};
  std::vector<Detection> dets;
  for (const auto& g : gts) {
    dets.emplace_back(g, 0.9);
  }
  const auto m = match_image(dets, gts, 0.5);
  EXPECT_EQ(m.true_positives, 2u);
  EXPECT_EQ(m.false_positives, 0u);
  EXPECT_EQ(m.false_negatives, 0u);
}

TEST(MatchImage, NoDetections)
{
  const std::vector<Box> gts{Box(0, 0, 1, 1), Box(2, 2, 3, 3), Box(4, 4, 5, 5)};
  const auto m = match_image({}, gts, 0.5);
  EXPECT_EQ(m.true_positives, 0u);
  EXPECT_EQ(m.false_positives, 0u);
  EXPECT_EQ(m.false_negatives, 3u);
}

// gt1 = [0,0,10,10]; det A = [0,0,10,6] has IoU 60/100 = 0.6 with gt1.
const std::vector<Box> two_gts{Box(0, 0, 10, 10), Box(50, 50, 60, 60)};
const std::vector<Detection> two_dets{Detection(Box(0, 0, 10, 6), 0.9),
  Detection(Box(100, 100, 110, 110), 0.8)};

TEST(MatchImage, GreedyHandExample)
{
  EXPECT_NEAR(iou(two_dets[0].box, two_gts[0]), 0.6, 1e-15);
  const auto m = match_image(two_dets, two_gts, 0.5);
  EXPECT_EQ(m.true_positives, 1u);
  EXPECT_EQ(m.false_positives, 1u);
  EXPECT_EQ(m.false_negatives, 1u);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].detection, 0u);
  EXPECT_EQ(m.pairs[0].ground_truth, 0u);
}

TEST(MatchImage, HigherScoreClaimsFirst)
{
  const std::vector<Box> gts{Box(0, 0, 10, 10)};
  const std::vector<Detection> dets{Detection(Box(0, 0, 10, 10), 0.3),
    Detection(Box(0, 0, 10, 8), 0.9)};
  const auto m = match_image(dets, gts, 0.5);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].detection, 1u);
  EXPECT_FALSE(m.detection_matched[0]);
}

TEST(AveragePrecision, Examples)
{
  EXPECT_DOUBLE_EQ(average_precision({{two_dets, two_gts}}, 0.5), 0.5);
  std::vector<Detection> perfect;
  for (const auto& g : two_gts) {
    perfect.emplace_back(g, 0.7);
  }
  EXPECT_DOUBLE_EQ(average_precision({{perfect, two_gts}}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({{{}, two_gts}}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(average_precision({{{}, {}}}, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({{two_dets, {}}}, 0.5), 0.0);
}

TEST(MapRange, DefaultThresholds)
{
  const EvalConfig cfg;
  ASSERT_EQ(cfg.iou_thresholds.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(cfg.iou_thresholds[i], 0.50 + 0.05 * i, 1e-12);
  }
}

TEST(MapRange, PerfectIsOneInBothModes)
{
  std::vector<Detection> perfect;
  for (const auto& g : two_gts) {
    perfect.emplace_back(g, 0.7);
  }
  for (auto mode : {MetricMode::ap_curve, MetricMode::challenge}) {
    EvalConfig cfg;
    cfg.mode = mode;
    EXPECT_DOUBLE_EQ(map_range({{perfect, two_gts}, {{}, {}}}, cfg), 1.0);
  }
}

TEST(MapRange, ChallengeHandExample)
{
  EvalConfig cfg;
  cfg.mode = MetricMode::challenge;
  // IoU 0.6: matched at 0.50..0.60 (1 TP, 1 FP, 1 FN -> 1/3), unmatched above.
  const double expected = (1.0 / 3 + 1.0 / 3 + 1.0 / 3 + 0 + 0 + 0) / 6;
  EXPECT_NEAR(map_range({{two_dets, two_gts}}, cfg), expected, 1e-15);
}

TEST(EvalConfig, RejectsBadThresholds)
{
  EvalConfig cfg;
  cfg.iou_thresholds = {0.5, 0.5};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.iou_thresholds = {0.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.iou_thresholds = {};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Oracle, RandomInstancesMatchBothModes)
{
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = testgen::random_instance(rng);
    const auto images = to_eval(inst);
    for (double t : EvalConfig{}.iou_thresholds) {
      ASSERT_NEAR(average_precision(images, t), oracle::average_precision(inst, t), 1e-9);
      double ch = 0.0;
      for (const auto& im : images) {
        ch += challenge_score(im.detections, im.ground_truth, t);
      }
      ch = images.empty() ? 1.0 : ch / images.size();
      ASSERT_NEAR(ch, oracle::challenge(inst, t), 1e-9);
    }
  }
}

TEST(Properties, CountIdentitiesAndBounds)
{
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const auto images = to_eval(testgen::random_instance(rng));
    for (const auto& im : images) {
      for (double t : {0.3, 0.5, 0.75}) {
        const auto m = match_image(im.detections, im.ground_truth, t);
        EXPECT_EQ(m.true_positives + m.false_negatives, im.ground_truth.size());
        EXPECT_EQ(m.true_positives + m.false_positives, im.detections.size());
        std::vector<int> gt_hits(im.ground_truth.size(), 0);
        for (const auto& p : m.pairs) {
          ++gt_hits[p.ground_truth];
          EXPECT_GE(p.iou, t);
        }
        for (int h : gt_hits) {
          EXPECT_LE(h, 1);
        }
      }
    }
    for (auto mode : {MetricMode::ap_curve, MetricMode::challenge}) {
      EvalConfig cfg;
      cfg.mode = mode;
      const double v = map_range(images, cfg);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Properties, FalsePositiveMonotonicity)
{
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    auto images = to_eval(testgen::random_instance(rng));
    const double t = 0.5;
    const double base = average_precision(images, t);

    // Adding a detection disjoint from every gt never increases AP.
    auto more = images;
    std::uniform_real_distribution<double> s(0.0, 1.0);
    more[0].detections.emplace_back(Box(500, 500, 510, 510), s(rng));
    EXPECT_LE(average_precision(more, t), base + 1e-12);

    // Removing a false positive never decreases AP.
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto m = match_image(images[i].detections, images[i].ground_truth, t);
      for (std::size_t d = 0; d < images[i].detections.size(); ++d) {
        if (!m.detection_matched[d]) {
          auto fewer = images;
          fewer[i].detections.erase(fewer[i].detections.begin() + static_cast<long>(d));
          EXPECT_GE(average_precision(fewer, t), base - 1e-12);
          break;
        }
      }
    }
  }
}

TEST(Properties, ThresholdMonotonicity)
{
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto images = to_eval(testgen::random_instance(rng));
    const auto& ts = EvalConfig{}.iou_thresholds;
    for (std::size_t i = 1; i < ts.size(); ++i) {
      EXPECT_GE(average_precision(images, ts[i - 1]), average_precision(images, ts[i]) - 1e-12);
    }
  }
}
