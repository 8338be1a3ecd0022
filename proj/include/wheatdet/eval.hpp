#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "wheatdet/core.hpp"
#include "wheatdet/fusion.hpp"

namespace wheatdet
{

struct MatchedPair
{
  std::size_t detection;
  std::size_t ground_truth;
  double iou;
};

struct MatchResult
{
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::vector<MatchedPair> pairs;
  /// Per detection, in the caller's input order: true when matched.
  std::vector<bool> detection_matched;
};

enum class MetricMode
{
  ap_curve,
  challenge
};

struct EvalConfig
{
  std::vector<double> iou_thresholds{0.50, 0.55, 0.60, 0.65, 0.70, 0.75};
  MetricMode mode = MetricMode::ap_curve;

  void validate() const
  {
    if (iou_thresholds.empty()) {
      throw std::invalid_argument("at least one IoU threshold is required");
    }
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      const double t = iou_thresholds[i];
      if (!(t > 0.0 && t < 1.0)) {
        throw std::invalid_argument("IoU thresholds must lie in (0,1)");
      }
      if (i > 0 && !(t > iou_thresholds[i - 1])) {
        throw std::invalid_argument("IoU thresholds must be strictly increasing");
      }
    }
  }
};

/// Detections and ground truth for one image.
struct ImageEval
{
  std::vector<Detection> detections;
  std::vector<Box> ground_truth;
};

namespace detail
{
/// Indices of @p dets in evaluation order: descending score, then coordinates,
/// then input position.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& dets)
{
  std::vector<std::size_t> idx(dets.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return ranks_before(dets[a], dets[b]);
    });
  return idx;
}
}  // namespace detail

/**
 * @brief Greedy matching of one image's detections to its ground truth.
 * @details In score order, each detection takes the still-unmatched ground
 *          truth with the highest IoU (lowest index on ties), provided that
 *          IoU reaches @p iou_threshold.
 */
inline MatchResult match_image(
  const std::vector<Detection>& dets, const std::vector<Box>& gts, double iou_threshold)
{
  MatchResult r;
  r.detection_matched.assign(dets.size(), false);
  std::vector<bool> gt_taken(gts.size(), false);
  for (std::size_t di : detail::score_order(dets)) {
    std::size_t best = gts.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g]) {
        continue;
      }
      const double o = iou(dets[di].box, gts[g]);
      if (o >= iou_threshold && o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best < gts.size()) {
      gt_taken[best] = true;
      r.detection_matched[di] = true;
      r.pairs.push_back({di, best, best_iou});
      ++r.true_positives;
    } else {
      ++r.false_positives;
    }
  }
  r.false_negatives = gts.size() - r.true_positives;
  return r;
}

/**
 * @brief All-point interpolated average precision at one IoU threshold.
 * @details Detections from every image are pooled and ranked (score, then
 *          image index, then in-image rank). With no ground truth at all the
 *          result is 1 when there are also no detections and 0 otherwise.
 */
inline double average_precision(const std::vector<ImageEval>& images, double iou_threshold)
{
  struct Ranked
  {
    double score;
    std::size_t image;
    std::size_t rank;
    bool tp;
  };
  std::vector<Ranked> pooled;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& im = images[i];
    n_gt += im.ground_truth.size();
    const auto m = match_image(im.detections, im.ground_truth, iou_threshold);
    const auto order = detail::score_order(im.detections);
    for (std::size_t k = 0; k < order.size(); ++k) {
      pooled.push_back({im.detections[order[k]].score, i, k, m.detection_matched[order[k]]});
    }
  }
  if (n_gt == 0) {
    return pooled.empty() ? 1.0 : 0.0;
  }
  std::sort(pooled.begin(), pooled.end(), [](const Ranked& a, const Ranked& b) {
      if (a.score != b.score) {return a.score > b.score;}
      if (a.image != b.image) {return a.image < b.image;}
      return a.rank < b.rank;
    });

  const std::size_t n = pooled.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += pooled[k].tp ? 1 : 0;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  for (std::size_t k = n; k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return std::clamp(ap, 0.0, 1.0);
}

/// TP / (TP + FP + FN) for one image; 1 when it has neither detections nor
/// ground truth.
inline double challenge_score(const std::vector<Detection>& dets,
  const std::vector<Box>& gts, double iou_threshold)
{
  if (dets.empty() && gts.empty()) {
    return 1.0;
  }
  const auto m = match_image(dets, gts, iou_threshold);
  const auto denom = m.true_positives + m.false_positives + m.false_negatives;
  return static_cast<double>(m.true_positives) / static_cast<double>(denom);
}

struct EvalReport
{
  MetricMode mode;
  std::vector<double> thresholds;
  std::vector<double> per_threshold;
  double value = 0.0;
  std::size_t image_count = 0;
  std::size_t detection_count = 0;
  std::size_t ground_truth_count = 0;
};

inline EvalReport evaluate(const std::vector<ImageEval>& images, const EvalConfig& config)
{
  config.validate();
  EvalReport rep;
  rep.mode = config.mode;
  rep.thresholds = config.iou_thresholds;
  rep.image_count = images.size();
  for (const auto& im : images) {
    rep.detection_count += im.detections.size();
    rep.ground_truth_count += im.ground_truth.size();
  }
  for (double t : config.iou_thresholds) {
    double v = 0.0;
    if (config.mode == MetricMode::ap_curve) {
      v = average_precision(images, t);
    } else if (images.empty()) {
      v = 1.0;
    } else {
      for (const auto& im : images) {
        v += challenge_score(im.detections, im.ground_truth, t);
      }
      v /= static_cast<double>(images.size());
    }
    rep.per_threshold.push_back(v);
  }
  rep.value = std::accumulate(rep.per_threshold.begin(), rep.per_threshold.end(), 0.0) /
    static_cast<double>(rep.per_threshold.size());
  return rep;
}

/// mAP over the configured IoU thresholds.
inline double map_range(const std::vector<ImageEval>& images, const EvalConfig& config)
{
  return evaluate(images, config).value;
}

inline const char* to_string(MetricMode m)
{
  return m == MetricMode::ap_curve ? "ap" : "challenge";
}

}  // namespace wheatdet
