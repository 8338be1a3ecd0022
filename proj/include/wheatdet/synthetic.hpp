#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wheatdet/core.hpp"
#include "wheatdet/orchestrate.hpp"
#include "wheatdet/raster.hpp"
#include "wheatdet/transforms.hpp"

namespace wheatdet
{

class GenerationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Seed derived from a base seed and a string key (FNV-1a + splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key)
{
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct SceneConfig
{
  int width = 512;
  int height = 512;
  int min_heads = 20;
  int max_heads = 40;
  /// Largest IoU allowed between any two ground-truth boxes; 0 forbids overlap.
  double overlap = 0.2;
  double min_size = 24.0;
  double max_size = 56.0;
  bool raster = false;
  std::string source = "synthetic";
  int max_attempts = 20000;
};

struct Scene
{
  ImageRecord record;
  std::optional<Image> image;
};

/// Rejection-sampled field of heads. Draws ellipses into the optional raster.
template<class Rng>
Scene synth_scene(const SceneConfig& cfg, const std::string& image_id, Rng& rng)
{
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.min_heads < 0 || cfg.min_heads > cfg.max_heads ||
    !(cfg.min_size > 0.0) || cfg.min_size > cfg.max_size ||
    cfg.max_size > std::min(cfg.width, cfg.height) || cfg.overlap < 0.0 || cfg.overlap > 1.0)
  {
    throw std::invalid_argument("invalid scene configuration");
  }
  std::uniform_int_distribution<int> count(cfg.min_heads, cfg.max_heads);
  std::uniform_real_distribution<double> size(cfg.min_size, cfg.max_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = count(rng);

  Scene scene;
  scene.record = {image_id, cfg.width, cfg.height, cfg.source, {}};
  auto& boxes = scene.record.boxes;
  int attempts = 0;
  while (static_cast<int>(boxes.size()) < n) {
    if (++attempts > cfg.max_attempts) {
      throw GenerationError("could not place " + std::to_string(n) + " heads in a " +
              std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
              " frame at overlap " + std::to_string(cfg.overlap));
    }
    const double w = size(rng);
    const double h = size(rng);
    const double x = unit(rng) * (cfg.width - w);
    const double y = unit(rng) * (cfg.height - h);
    const Box cand(x, y, x + w, y + h);
    const bool ok = std::none_of(boxes.begin(), boxes.end(), [&](const Box& b) {
          return cfg.overlap == 0.0 ? intersection_area(b, cand) > 0.0 : iou(b, cand) > cfg.overlap;
        });
    if (ok) {
      boxes.push_back(cand);
    }
  }

  if (cfg.raster) {
    Image img(cfg.width, cfg.height);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        img.at(x, y, 0) = 70;
        img.at(x, y, 1) = 90;
        img.at(x, y, 2) = 40;
      }
    }
    for (const auto& b : boxes) {
      const double cx = (b.x1() + b.x2()) / 2;
      const double cy = (b.y1() + b.y2()) / 2;
      const double rx = b.width() / 2;
      const double ry = b.height() / 2;
      for (int y = static_cast<int>(b.y1()); y < std::min(cfg.height, static_cast<int>(b.y2()) + 1); ++y) {
        for (int x = static_cast<int>(b.x1()); x < std::min(cfg.width, static_cast<int>(b.x2()) + 1); ++x) {
          const double dx = (x + 0.5 - cx) / rx;
          const double dy = (y + 0.5 - cy) / ry;
          if (dx * dx + dy * dy <= 1.0) {
            img.at(x, y, 0) = 200;
            img.at(x, y, 1) = 180;
            img.at(x, y, 2) = 90;
          }
        }
      }
    }
    scene.image = std::move(img);
  }
  return scene;
}

/// Noisy oracle detector parameters. Scores: a true detection gets
/// IoU(jittered, truth) * (1 - score_jitter * U[0,1]); a false positive gets
/// U[fp_score_min, fp_score_max].
struct SyntheticDetectorConfig
{
  double sigma = 0.0;
  double drop_probability = 0.0;
  /// Mean false positives per image (Poisson).
  double fp_rate = 0.0;
  double score_jitter = 0.0;
  double fp_score_min = 0.05;
  double fp_score_max = 0.5;
  double fp_min_size = 24.0;
  double fp_max_size = 56.0;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (!(sigma >= 0.0) || !(drop_probability >= 0.0 && drop_probability <= 1.0) ||
      !(fp_rate >= 0.0) || !(score_jitter >= 0.0 && score_jitter <= 1.0) ||
      !(fp_score_min >= 0.0 && fp_score_min <= fp_score_max && fp_score_max <= 1.0) ||
      !(fp_min_size > 0.0 && fp_min_size <= fp_max_size))
    {
      throw std::invalid_argument("invalid synthetic detector configuration");
    }
  }
};

/**
 * @brief Deterministic noisy detections for one annotated image.
 * @details The random stream depends only on config.seed and the image id.
 */
inline std::vector<Detection> synth_detect(const ImageRecord& scene, const SyntheticDetectorConfig& cfg)
{
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, scene.image_id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double w = scene.width;
  const double h = scene.height;

  std::vector<Detection> out;
  for (const auto& gt : scene.boxes) {
    if (unit(rng) < cfg.drop_probability) {
      continue;
    }
    double x1 = gt.x1() + cfg.sigma * jitter(rng);
    double y1 = gt.y1() + cfg.sigma * jitter(rng);
    double x2 = gt.x2() + cfg.sigma * jitter(rng);
    double y2 = gt.y2() + cfg.sigma * jitter(rng);
    if (cfg.sigma > 0.0) {
      if (x1 > x2) {std::swap(x1, x2);}
      if (y1 > y2) {std::swap(y1, y2);}
      x1 = std::clamp(x1, 0.0, w);
      x2 = std::clamp(x2, 0.0, w);
      y1 = std::clamp(y1, 0.0, h);
      y2 = std::clamp(y2, 0.0, h);
      if (!(x1 < x2) || !(y1 < y2)) {
        continue;
      }
    }
    const Box box(x1, y1, x2, y2);
    const double score = std::clamp(iou(box, gt) * (1.0 - cfg.score_jitter * unit(rng)), 0.0, 1.0);
    out.emplace_back(box, score);
  }

  if (cfg.fp_rate > 0.0) {
    std::poisson_distribution<int> n_fp(cfg.fp_rate);
    const int n = n_fp(rng);
    for (int i = 0; i < n; ++i) {
      const double bw = std::min(w, cfg.fp_min_size + unit(rng) * (cfg.fp_max_size - cfg.fp_min_size));
      const double bh = std::min(h, cfg.fp_min_size + unit(rng) * (cfg.fp_max_size - cfg.fp_min_size));
      const double x = unit(rng) * (w - bw);
      const double y = unit(rng) * (h - bh);
      const double s = cfg.fp_score_min + unit(rng) * (cfg.fp_score_max - cfg.fp_score_min);
      out.emplace_back(Box(x, y, x + bw, y + bh), s);
    }
  }
  return out;
}

/// Zero-noise configuration: detections equal ground truth with score 1.
inline SyntheticDetectorConfig noiseless_detector()
{
  return {};
}

/**
 * @brief In-process DetectorBackend answering from ground truth.
 * @details TTA view requests are answered by mapping the base image's ground
 *          truth into the view frame before adding noise, so each view gets
 *          its own independent noise draw.
 */
class SyntheticBackend : public DetectorBackend
{
public:
  SyntheticBackend(const Dataset& ground_truth, SyntheticDetectorConfig config)
  : config_(config)
  {
    config_.validate();
    for (const auto& r : ground_truth.records) {
      truth_.emplace(r.image_id, r);
    }
  }

  void train(const Dataset&, int) override {++train_calls_;}

  PredictionMap predict(const std::vector<ManifestImage>& requests) override
  {
    ++predict_calls_;
    PredictionMap out;
    for (const auto& req : requests) {
      const std::string& base = req.base_id ? *req.base_id : req.id;
      auto it = truth_.find(base);
      if (it == truth_.end()) {
        throw AdapterError("synthetic detector has no ground truth for '" + base + "'");
      }
      ImageRecord view = it->second;
      view.image_id = req.id;
      if (req.view && !req.view->is_identity()) {
        std::vector<Box> moved;
        for (const auto& b : view.boxes) {
          moved.push_back(apply_to_box(*req.view, b, view.width, view.height).box);
        }
        std::tie(view.width, view.height) = req.view->output_size(view.width, view.height);
        view.boxes = std::move(moved);
      }
      out[req.id] = synth_detect(view, config_);
    }
    return out;
  }

  int train_calls() const noexcept {return train_calls_;}
  int predict_calls() const noexcept {return predict_calls_;}

private:
  SyntheticDetectorConfig config_;
  std::map<std::string, ImageRecord> truth_;
  int train_calls_ = 0;
  int predict_calls_ = 0;
};

}  // namespace wheatdet
