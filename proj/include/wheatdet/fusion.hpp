#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wheatdet/core.hpp"
#include "wheatdet/transforms.hpp"

namespace wheatdet
{

enum class ConfidenceMode
{
  average,
  average_rescaled
};

struct FusionConfig
{
  double iou_threshold = 0.55;
  double score_threshold = 0.0;
  /// One weight per input list. Empty means equal weights of 1.
  std::vector<double> model_weights{};
  ConfidenceMode confidence_mode = ConfidenceMode::average_rescaled;
};

namespace detail
{
/// Descending score, then ascending coordinates.
inline bool ranks_before(const Detection& a, const Detection& b) noexcept
{
  if (a.score != b.score) {
    return a.score > b.score;
  }
  return coord_less(a.box, b.box);
}

inline void check_one_space(const std::vector<Detection>& dets, const Detection*& first)
{
  for (const auto& d : dets) {
    if (first == nullptr) {
      first = &d;
    } else if (d.box.space() != first->box.space()) {
      throw std::invalid_argument("detections mix coordinate spaces");
    }
  }
}
}  // namespace detail

/// Sort detections into the canonical output order.
inline void sort_by_score(std::vector<Detection>& dets)
{
  std::stable_sort(dets.begin(), dets.end(), detail::ranks_before);
}

/**
 * @brief Greedy non-maximum suppression.
 * @details A detection survives iff its IoU with every previously kept
 *          detection is at most @p iou_threshold. Kept detections are
 *          returned unmodified in descending score order.
 */
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold)
{
  const Detection* first = nullptr;
  detail::check_one_space(dets, first);
  sort_by_score(dets);
  std::vector<Detection> kept;
  for (auto& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
        [&](const Detection& k) {return iou(k.box, d.box) > iou_threshold;});
    if (!suppressed) {
      kept.push_back(std::move(d));
    }
  }
  return kept;
}

/**
 * @brief Weighted Boxes Fusion over several prediction lists.
 *
 * Detections below the score threshold are discarded. The rest are visited
 * in descending weight*score order (coordinates break ties) and each joins
 * the fused cluster it overlaps most, provided IoU > iou_threshold and the
 * cluster holds no other member from the same list; otherwise it opens a new
 * cluster. A cluster's box is the weight*score weighted mean of its members;
 * its score is the mean member weight*score, times min(n, L)/L under
 * average_rescaled (L = number of lists). Scores are clamped to 1.
 */
inline std::vector<Detection> wbf(
  const std::vector<std::vector<Detection>>& det_lists, const FusionConfig& config)
{
  const std::size_t n_lists = det_lists.size();
  std::vector<double> weights = config.model_weights;
  if (weights.empty()) {
    weights.assign(n_lists, 1.0);
  }
  if (weights.size() != n_lists) {
    throw std::invalid_argument("model_weights has " + std::to_string(weights.size()) +
            " entries for " + std::to_string(n_lists) + " prediction lists");
  }
  for (double w : weights) {
    if (!(w > 0.0)) {
      throw std::invalid_argument("model weights must be positive");
    }
  }

  struct Entry
  {
    const Detection* det;
    std::size_t list;
    double weighted;
  };
  std::vector<Entry> entries;
  const Detection* first = nullptr;
  for (std::size_t l = 0; l < n_lists; ++l) {
    detail::check_one_space(det_lists[l], first);
    for (const auto& d : det_lists[l]) {
      if (d.score < config.score_threshold) {
        continue;
      }
      entries.push_back({&d, l, weights[l] * d.score});
    }
  }
  if (entries.empty()) {
    return {};
  }
  const Space space = first->box.space();

  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.weighted != b.weighted) {
        return a.weighted > b.weighted;
      }
      return coord_less(a.det->box, b.det->box);
    });

  // Weighted means are anchored on the first member: identical members then
  // reproduce its coordinates bit-exactly.
  struct Cluster
  {
    std::vector<const Entry*> members;
    std::vector<bool> lists_seen;
    Box anchor;
    double dx1 = 0, dy1 = 0, dx2 = 0, dy2 = 0, wsum = 0;
    Box fused;

    explicit Cluster(const Entry& e, std::size_t n)
    : lists_seen(n, false), anchor(e.det->box), fused(e.det->box)
    {
      add(e);
    }

    void add(const Entry& e)
    {
      members.push_back(&e);
      lists_seen[e.list] = true;
      const Box& b = e.det->box;
      dx1 += e.weighted * (b.x1() - anchor.x1());
      dy1 += e.weighted * (b.y1() - anchor.y1());
      dx2 += e.weighted * (b.x2() - anchor.x2());
      dy2 += e.weighted * (b.y2() - anchor.y2());
      wsum += e.weighted;
      if (wsum > 0.0) {
        fused = Box(anchor.x1() + dx1 / wsum, anchor.y1() + dy1 / wsum,
            anchor.x2() + dx2 / wsum, anchor.y2() + dy2 / wsum, b.space());
      }
    }
  };

  std::vector<Cluster> clusters;
  for (const auto& e : entries) {
    std::size_t best = clusters.size();
    double best_iou = config.iou_threshold;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].lists_seen[e.list]) {
        continue;
      }
      const double o = iou(clusters[c].fused, e.det->box);
      if (o > best_iou) {
        best_iou = o;
        best = c;
      }
    }
    if (best < clusters.size()) {
      clusters[best].add(e);
    } else {
      clusters.emplace_back(e, n_lists);
    }
  }

  std::vector<Detection> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    const double n = static_cast<double>(c.members.size());
    double score = c.wsum / n;
    if (config.confidence_mode == ConfidenceMode::average_rescaled) {
      score *= std::min(n, static_cast<double>(n_lists)) / static_cast<double>(n_lists);
    }
    Box box = c.fused;
    if (space == Space::normalized) {
      // Weighted means of values in [0,1] can drift by an ulp.
      box = Box(std::clamp(box.x1(), 0.0, 1.0), std::clamp(box.y1(), 0.0, 1.0),
          std::clamp(box.x2(), 0.0, 1.0), std::clamp(box.y2(), 0.0, 1.0), space);
    }
    out.emplace_back(box, std::clamp(score, 0.0, 1.0));
  }
  sort_by_score(out);
  return out;
}

/// Predictions of one TTA view, expressed in that view's frame.
struct ViewPredictions
{
  OrientationTransform view;
  std::vector<Detection> detections;
};

/// Map every view's detections back to the original @p width x @p height
/// frame and fuse them with equal weights.
inline std::vector<Detection> fuse_tta(
  const std::vector<ViewPredictions>& view_preds, int width, int height, FusionConfig config)
{
  std::vector<std::vector<Detection>> lists;
  lists.reserve(view_preds.size());
  for (const auto& vp : view_preds) {
    const auto [vw, vh] = vp.view.output_size(width, height);
    const OrientationTransform back = inverse(vp.view);
    std::vector<Detection> mapped;
    mapped.reserve(vp.detections.size());
    for (const auto& d : vp.detections) {
      mapped.emplace_back(apply_to_box(back, d.box, vw, vh).box, d.score, d.origin);
    }
    lists.push_back(std::move(mapped));
  }
  config.model_weights.clear();
  return wbf(lists, config);
}

struct ScalePredictions
{
  int width;
  int height;
  std::vector<Detection> detections;
};

/// Normalize each scale's absolute detections and fuse; output is normalized.
inline std::vector<Detection> fuse_multiscale(
  const std::vector<ScalePredictions>& preds_per_scale, const FusionConfig& config)
{
  std::vector<std::vector<Detection>> lists;
  lists.reserve(preds_per_scale.size());
  for (const auto& sp : preds_per_scale) {
    detail::check_dims(sp.width, sp.height);
    std::vector<Detection> norm;
    norm.reserve(sp.detections.size());
    for (const auto& d : sp.detections) {
      norm.emplace_back(normalize(d.box, sp.width, sp.height), d.score, d.origin);
    }
    lists.push_back(std::move(norm));
  }
  return wbf(lists, config);
}

/// Drop detections scoring below @p min_score.
inline std::vector<Detection> filter_by_score(std::vector<Detection> dets, double min_score)
{
  std::erase_if(dets, [&](const Detection& d) {return d.score < min_score;});
  return dets;
}

}  // namespace wheatdet
