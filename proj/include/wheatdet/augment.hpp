#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wheatdet/core.hpp"
#include "wheatdet/raster.hpp"
#include "wheatdet/transforms.hpp"

namespace wheatdet
{

enum class AugKind
{
  crop_resize,
  hue_saturation,
  brightness_contrast,
  to_gray,
  gaussian_noise,
  hflip,
  vflip,
  rot90,
  cutout,
  motion_blur,
  shadow,
  random_erase
};

inline constexpr std::array<std::pair<AugKind, const char*>, 12> aug_kind_names{{
  {AugKind::crop_resize, "crop_resize"},
  {AugKind::hue_saturation, "hue_saturation"},
  {AugKind::brightness_contrast, "brightness_contrast"},
  {AugKind::to_gray, "to_gray"},
  {AugKind::gaussian_noise, "gaussian_noise"},
  {AugKind::hflip, "hflip"},
  {AugKind::vflip, "vflip"},
  {AugKind::rot90, "rot90"},
  {AugKind::cutout, "cutout"},
  {AugKind::motion_blur, "motion_blur"},
  {AugKind::shadow, "shadow"},
  {AugKind::random_erase, "random_erase"},
}};

inline const char* to_string(AugKind k)
{
  for (const auto& [kind, name] : aug_kind_names) {
    if (kind == k) {
      return name;
    }
  }
  return "?";
}

inline AugKind aug_kind_from_string(const std::string& s)
{
  for (const auto& [kind, name] : aug_kind_names) {
    if (s == name) {
      return kind;
    }
  }
  throw std::invalid_argument("unknown augmentation kind '" + s + "'");
}

/// Parameters for every op kind. Each kind reads only its own fields;
/// magnitudes default to mild values on a 0-255 scale.
struct AugParams
{
  // crop_resize: crop side as a fraction of the image side.
  double crop_min = 0.5;
  double crop_max = 1.0;
  // hue_saturation: hue shift in degrees, saturation/value shift as fractions.
  double hue_shift = 20.0;
  double sat_shift = 0.3;
  double val_shift = 0.2;
  // brightness_contrast: +-fraction.
  double brightness_limit = 0.2;
  double contrast_limit = 0.2;
  // gaussian_noise: sigma drawn uniformly from [sigma_min, sigma_max].
  double sigma_min = 2.0;
  double sigma_max = 10.0;
  // cutout: hole side as a fraction of the image side.
  int holes = 8;
  double hole_min = 0.05;
  double hole_max = 0.10;
  // random_erase: area fraction and aspect ratio ranges.
  double erase_area_min = 0.02;
  double erase_area_max = 0.2;
  double erase_aspect_min = 0.3;
  double erase_aspect_max = 3.3;
  // cutout / random_erase fill.
  int fill = 0;
  // motion_blur: odd kernel length range, angle range in degrees.
  int blur_min = 3;
  int blur_max = 7;
  double angle_min = 0.0;
  double angle_max = 360.0;
  // shadow: dimming factor range.
  double dim_min = 0.4;
  double dim_max = 0.8;

  bool operator==(const AugParams&) const = default;
};

struct AugmentationOp
{
  AugKind kind;
  AugParams params{};

  bool operator==(const AugmentationOp&) const = default;

  void validate() const
  {
    const auto& p = params;
    auto require = [this](bool ok, const char* what) {
        if (!ok) {
          throw std::invalid_argument(std::string(to_string(kind)) + ": " + what);
        }
      };
    switch (kind) {
      case AugKind::crop_resize:
        require(p.crop_min > 0.0 && p.crop_min <= p.crop_max && p.crop_max <= 1.0,
          "crop fractions must satisfy 0 < min <= max <= 1");
        break;
      case AugKind::hue_saturation:
        require(p.hue_shift >= 0.0 && p.sat_shift >= 0.0 && p.val_shift >= 0.0,
          "shift limits must be non-negative");
        break;
      case AugKind::brightness_contrast:
        require(p.brightness_limit >= 0.0 && p.contrast_limit >= 0.0 && p.contrast_limit < 1.0,
          "limits must be non-negative, contrast below 1");
        break;
      case AugKind::gaussian_noise:
        require(p.sigma_min >= 0.0 && p.sigma_min <= p.sigma_max, "need 0 <= sigma_min <= sigma_max");
        break;
      case AugKind::cutout:
        require(p.holes >= 1, "hole count must be at least 1");
        require(p.hole_min > 0.0 && p.hole_min <= p.hole_max && p.hole_max <= 1.0,
          "hole size fractions must satisfy 0 < min <= max <= 1");
        require(p.fill >= 0 && p.fill <= 255, "fill must be in [0,255]");
        break;
      case AugKind::random_erase:
        require(p.erase_area_min > 0.0 && p.erase_area_min <= p.erase_area_max &&
          p.erase_area_max <= 1.0, "area fractions must satisfy 0 < min <= max <= 1");
        require(p.erase_aspect_min > 0.0 && p.erase_aspect_min <= p.erase_aspect_max,
          "aspect range must be positive");
        require(p.fill >= 0 && p.fill <= 255, "fill must be in [0,255]");
        break;
      case AugKind::motion_blur:
        require(p.blur_min >= 3 && p.blur_min <= p.blur_max && p.blur_min % 2 == 1 &&
          p.blur_max % 2 == 1, "kernel lengths must be odd and >= 3");
        require(p.angle_min <= p.angle_max, "angle range reversed");
        break;
      case AugKind::shadow:
        require(p.dim_min > 0.0 && p.dim_min <= p.dim_max && p.dim_max < 1.0,
          "dim factors must satisfy 0 < min <= max < 1");
        break;
      case AugKind::to_gray:
      case AugKind::hflip:
      case AugKind::vflip:
      case AugKind::rot90:
        break;
    }
  }
};

struct PolicyEntry
{
  AugmentationOp op;
  double probability;

  bool operator==(const PolicyEntry&) const = default;
};

/// Ordered list of ops, each applied independently with its probability.
struct AugmentationPolicy
{
  std::string name;
  std::vector<PolicyEntry> entries;

  void validate() const
  {
    for (const auto& e : entries) {
      if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
        throw std::invalid_argument("policy '" + name + "': probability outside [0,1]");
      }
      e.op.validate();
    }
  }
};

inline AugmentationOp cutout_op(int holes)
{
  AugmentationOp op{AugKind::cutout};
  op.params.holes = holes;
  return op;
}

/// Training policy G1.
inline AugmentationPolicy policy_g1()
{
  return {"G1", {
      {{AugKind::crop_resize}, 0.5},
      {{AugKind::hue_saturation}, 0.8},
      {{AugKind::to_gray}, 0.01},
      {{AugKind::hflip}, 0.5},
      {{AugKind::vflip}, 0.5},
      {cutout_op(8), 0.5},
    }};
}

/// Training policy G2.
inline AugmentationPolicy policy_g2()
{
  return {"G2", {
      {{AugKind::crop_resize}, 0.2},
      {{AugKind::hue_saturation}, 0.8},
      {{AugKind::brightness_contrast}, 0.8},
      {{AugKind::to_gray}, 0.01},
      {{AugKind::gaussian_noise}, 0.01},
      {{AugKind::hflip}, 0.4},
      {{AugKind::vflip}, 0.4},
      {{AugKind::rot90}, 0.4},
      {cutout_op(8), 0.4},
      {cutout_op(10), 0.4},
      {{AugKind::motion_blur}, 0.3},
      {{AugKind::shadow}, 0.3},
    }};
}

/// Resolve "G1"/"G2"; any other name throws.
inline AugmentationPolicy builtin_policy(const std::string& name)
{
  if (name == "G1") {
    return policy_g1();
  }
  if (name == "G2") {
    return policy_g2();
  }
  throw std::invalid_argument("no built-in policy named '" + name + "'");
}

/// Independent Bernoulli draw per entry, in policy order.
template<class Rng>
std::vector<AugmentationOp> sample(const AugmentationPolicy& policy, Rng& rng)
{
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AugmentationOp> out;
  for (const auto& e : policy.entries) {
    if (u(rng) < e.probability) {
      out.push_back(e.op);
    }
  }
  return out;
}

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct PixelRect
{
  int x0, y0, x1, y1;

  bool contains(int x, int y) const noexcept {return x >= x0 && x < x1 && y >= y0 && y < y1;}
  bool operator==(const PixelRect&) const = default;
};

inline void fill_rect(Image& img, const PixelRect& r, std::uint8_t value)
{
  for (int y = std::max(0, r.y0); y < std::min(img.height(), r.y1); ++y) {
    for (int x = std::max(0, r.x0); x < std::min(img.width(), r.x1); ++x) {
      for (int c = 0; c < Image::channels; ++c) {
        img.at(x, y, c) = value;
      }
    }
  }
}

template<class Rng>
std::vector<PixelRect> sample_cutout_holes(int width, int height, const AugParams& p, Rng& rng)
{
  std::uniform_real_distribution<double> frac(p.hole_min, p.hole_max);
  std::vector<PixelRect> holes;
  for (int i = 0; i < p.holes; ++i) {
    const int hw = std::clamp(static_cast<int>(std::lround(frac(rng) * width)), 1, width);
    const int hh = std::clamp(static_cast<int>(std::lround(frac(rng) * height)), 1, height);
    std::uniform_int_distribution<int> px(0, width - hw);
    std::uniform_int_distribution<int> py(0, height - hh);
    const int x0 = px(rng);
    const int y0 = py(rng);
    holes.push_back({x0, y0, x0 + hw, y0 + hh});
  }
  return holes;
}

template<class Rng>
PixelRect sample_erase_rect(int width, int height, const AugParams& p, Rng& rng)
{
  std::uniform_real_distribution<double> area_frac(p.erase_area_min, p.erase_area_max);
  std::uniform_real_distribution<double> log_aspect(std::log(p.erase_aspect_min),
    std::log(p.erase_aspect_max));
  const double a = area_frac(rng) * width * height;
  const double r = std::exp(log_aspect(rng));
  const int ew = std::clamp(static_cast<int>(std::lround(std::sqrt(a * r))), 1, width);
  const int eh = std::clamp(static_cast<int>(std::lround(std::sqrt(a / r))), 1, height);
  std::uniform_int_distribution<int> px(0, width - ew);
  std::uniform_int_distribution<int> py(0, height - eh);
  const int x0 = px(rng);
  const int y0 = py(rng);
  return {x0, y0, x0 + ew, y0 + eh};
}

/**
 * @brief Line-kernel motion blur.
 * @details Each output pixel is the rounded mean of @p kernel_length samples
 *          along direction @p angle_deg (x right, y down), centred on the
 *          pixel; samples falling outside the frame replicate the edge.
 */
inline Image motion_blur(const Image& img, int kernel_length, double angle_deg)
{
  if (kernel_length < 3 || kernel_length % 2 == 0) {
    throw std::invalid_argument("motion blur kernel length must be odd and >= 3");
  }
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const int half = kernel_length / 2;
  std::vector<std::pair<int, int>> taps;
  for (int k = -half; k <= half; ++k) {
    taps.emplace_back(static_cast<int>(std::lround(k * std::cos(rad))),
      static_cast<int>(std::lround(k * std::sin(rad))));
  }
  const int w = img.width();
  const int h = img.height();
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < Image::channels; ++c) {
        int sum = 0;
        for (const auto& [dx, dy] : taps) {
          sum += img.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1), c);
        }
        out.at(x, y, c) = clamp_u8(static_cast<double>(sum) / kernel_length);
      }
    }
  }
  return out;
}

struct Point2
{
  double x, y;
};

/**
 * @brief Darken the pixels whose centres fall inside a convex quadrilateral.
 * @details Vertices may wind either way. Zero-area or non-convex polygons
 *          throw std::invalid_argument.
 */
inline Image shadow(const Image& img, const std::array<Point2, 4>& polygon, double dim_factor)
{
  if (!(dim_factor > 0.0 && dim_factor < 1.0)) {
    throw std::invalid_argument("shadow dim factor must lie in (0,1)");
  }
  auto cross = [&](int i, Point2 p) {
      const Point2 a = polygon[i];
      const Point2 b = polygon[(i + 1) % 4];
      return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double turn = cross(i, polygon[(i + 2) % 4]);
    const int s = turn > 0.0 ? 1 : (turn < 0.0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) {
      throw std::invalid_argument("shadow polygon must be a non-degenerate convex quadrilateral");
    }
    sign = s;
  }
  Image out = img;
  double minx = polygon[0].x, maxx = minx, miny = polygon[0].y, maxy = miny;
  for (const auto& p : polygon) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int x_lo = std::max(0, static_cast<int>(std::floor(minx)));
  const int x_hi = std::min(img.width(), static_cast<int>(std::ceil(maxx)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(miny)));
  const int y_hi = std::min(img.height(), static_cast<int>(std::ceil(maxy)));
  for (int y = y_lo; y < y_hi; ++y) {
    for (int x = x_lo; x < x_hi; ++x) {
      const Point2 c{x + 0.5, y + 0.5};
      bool inside = true;
      for (int i = 0; i < 4 && inside; ++i) {
        inside = cross(i, c) * sign >= 0.0;
      }
      if (!inside) {
        continue;
      }
      for (int ch = 0; ch < Image::channels; ++ch) {
        out.at(x, y, ch) = clamp_u8(out.at(x, y, ch) * dim_factor);
      }
    }
  }
  return out;
}

namespace detail
{

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v)
{
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b)
{
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp)) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

inline Image hue_saturation(const Image& img, double dh, double ds, double dv)
{
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double h, s, v;
      rgb_to_hsv(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2), h, s, v);
      h = std::fmod(h + dh + 360.0, 360.0);
      s = std::clamp(s * (1.0 + ds), 0.0, 1.0);
      v = v * (1.0 + dv);
      double r, g, b;
      hsv_to_rgb(h, s, v, r, g, b);
      out.at(x, y, 0) = clamp_u8(r);
      out.at(x, y, 1) = clamp_u8(g);
      out.at(x, y, 2) = clamp_u8(b);
    }
  }
  return out;
}

template<class F>
void map_pixels(Image& img, F f)
{
  for (auto& p : img.pixels()) {
    p = f(p);
  }
}

inline Image to_gray(const Image& img)
{
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::uint8_t lum = clamp_u8(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
          0.114 * img.at(x, y, 2));
      for (int c = 0; c < Image::channels; ++c) {
        out.at(x, y, c) = lum;
      }
    }
  }
  return out;
}

/// Bilinear resample of the window [x0, x0+cw) x [y0, y0+ch) to w x h.
inline Image crop_resize(const Image& img, int x0, int y0, int cw, int ch, int w, int h)
{
  Image out(w, h);
  const double sx = static_cast<double>(cw) / w;
  const double sy = static_cast<double>(ch) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, ch - 1.0);
    const int y_a = static_cast<int>(fy);
    const int y_b = std::min(y_a + 1, ch - 1);
    const double ty = fy - y_a;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, cw - 1.0);
      const int x_a = static_cast<int>(fx);
      const int x_b = std::min(x_a + 1, cw - 1);
      const double tx = fx - x_a;
      for (int c = 0; c < Image::channels; ++c) {
        const double top = img.at(x0 + x_a, y0 + y_a, c) * (1 - tx) + img.at(x0 + x_b, y0 + y_a, c) * tx;
        const double bot = img.at(x0 + x_a, y0 + y_b, c) * (1 - tx) + img.at(x0 + x_b, y0 + y_b, c) * tx;
        out.at(x, y, c) = clamp_u8(top * (1 - ty) + bot * ty);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Remnants of a cropped box below this fraction of its original area are dropped.
inline constexpr double crop_keep_fraction = 0.1;

/**
 * @brief Map boxes into the crop window [x0,x0+cw) x [y0,y0+ch) rescaled to w x h.
 * @details Boxes are clipped to the window; a box whose remnant keeps less
 *          than crop_keep_fraction of its area is dropped.
 */
inline std::vector<Box> crop_boxes(const std::vector<Box>& boxes, int x0, int y0, int cw, int ch,
  int w, int h)
{
  std::vector<Box> out;
  for (const auto& b : boxes) {
    const double ix1 = std::max(b.x1(), static_cast<double>(x0));
    const double iy1 = std::max(b.y1(), static_cast<double>(y0));
    const double ix2 = std::min(b.x2(), static_cast<double>(x0 + cw));
    const double iy2 = std::min(b.y2(), static_cast<double>(y0 + ch));
    if (!(ix1 < ix2) || !(iy1 < iy2)) {
      continue;
    }
    if ((ix2 - ix1) * (iy2 - iy1) < crop_keep_fraction * area(b)) {
      continue;
    }
    const double nx1 = (ix1 - x0) * w / cw;
    const double ny1 = (iy1 - y0) * h / ch;
    const double nx2 = (ix2 - x0) * w / cw;
    const double ny2 = (iy2 - y0) * h / ch;
    if (nx1 < nx2 && ny1 < ny2) {
      out.emplace_back(nx1, ny1, nx2, ny2);
    }
  }
  return out;
}

struct Augmented
{
  Image image;
  std::vector<Box> boxes;
};

/// Apply @p ops in order. Geometric ops move the boxes, photometric and
/// occlusion ops leave them untouched.
template<class Rng>
Augmented apply(const std::vector<AugmentationOp>& ops, Image image, std::vector<Box> boxes, Rng& rng)
{
  for (const auto& b : boxes) {
    if (b.space() != Space::absolute || b.x1() < 0.0 || b.y1() < 0.0 ||
      b.x2() > image.width() || b.y2() > image.height())
    {
      throw std::invalid_argument("augmentation input box outside the image frame");
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) {return lo + (hi - lo) * unit(rng);};

  auto orient = [&](const OrientationTransform& t) {
      std::vector<Box> moved;
      moved.reserve(boxes.size());
      for (const auto& b : boxes) {
        moved.push_back(apply_to_box(t, b, image.width(), image.height()).box);
      }
      image = apply_to_image(t, image);
      boxes = std::move(moved);
    };

  for (const auto& op : ops) {
    op.validate();
    const auto& p = op.params;
    const int w = image.width();
    const int h = image.height();
    switch (op.kind) {
      case AugKind::crop_resize: {
        const double s = uniform(p.crop_min, p.crop_max);
        const int cw = static_cast<int>(std::lround(s * w));
        const int ch = static_cast<int>(std::lround(s * h));
        if (cw < 1 || ch < 1) {
          throw std::invalid_argument("crop_resize produced an empty crop");
        }
        std::uniform_int_distribution<int> px(0, w - cw);
        std::uniform_int_distribution<int> py(0, h - ch);
        const int x0 = px(rng);
        const int y0 = py(rng);
        boxes = crop_boxes(boxes, x0, y0, cw, ch, w, h);
        image = detail::crop_resize(image, x0, y0, cw, ch, w, h);
        break;
      }
      case AugKind::hue_saturation:
        image = detail::hue_saturation(image, uniform(-p.hue_shift, p.hue_shift),
            uniform(-p.sat_shift, p.sat_shift), uniform(-p.val_shift, p.val_shift));
        break;
      case AugKind::brightness_contrast: {
        const double alpha = 1.0 + uniform(-p.contrast_limit, p.contrast_limit);
        const double beta = 255.0 * uniform(-p.brightness_limit, p.brightness_limit);
        detail::map_pixels(image, [&](std::uint8_t v) {return clamp_u8(alpha * v + beta);});
        break;
      }
      case AugKind::to_gray:
        image = detail::to_gray(image);
        break;
      case AugKind::gaussian_noise: {
        std::normal_distribution<double> noise(0.0, uniform(p.sigma_min, p.sigma_max));
        detail::map_pixels(image, [&](std::uint8_t v) {return clamp_u8(v + noise(rng));});
        break;
      }
      case AugKind::hflip:
        orient({true, false, false});
        break;
      case AugKind::vflip:
        orient({false, true, false});
        break;
      case AugKind::rot90: {
        // Uniform over 0..3 quarter turns: r, r^2 = hv, r^3 = hvr.
        std::uniform_int_distribution<int> turns(0, 3);
        switch (turns(rng)) {
          case 1: orient({false, false, true}); break;
          case 2: orient({true, true, false}); break;
          case 3: orient({true, true, true}); break;
          default: break;
        }
        break;
      }
      case AugKind::cutout:
        for (const auto& r : sample_cutout_holes(w, h, p, rng)) {
          fill_rect(image, r, static_cast<std::uint8_t>(p.fill));
        }
        break;
      case AugKind::random_erase:
        fill_rect(image, sample_erase_rect(w, h, p, rng), static_cast<std::uint8_t>(p.fill));
        break;
      case AugKind::motion_blur: {
        std::uniform_int_distribution<int> half(p.blur_min / 2, p.blur_max / 2);
        const int len = 2 * half(rng) + 1;
        image = motion_blur(image, len, uniform(p.angle_min, p.angle_max));
        break;
      }
      case AugKind::shadow: {
        // Random convex quad: one point per quadrant of a random rectangle.
        const double cx = uniform(0.0, w);
        const double cy = uniform(0.0, h);
        const double rx = uniform(0.1, 0.5) * w;
        const double ry = uniform(0.1, 0.5) * h;
        std::array<Point2, 4> quad{};
        for (int i = 0; i < 4; ++i) {
          const double a = (i + uniform(0.1, 0.9)) * std::numbers::pi / 2.0;
          quad[i] = {cx + rx * std::cos(a), cy + ry * std::sin(a)};
        }
        image = shadow(image, quad, uniform(p.dim_min, p.dim_max));
        break;
      }
    }
  }
  return {std::move(image), std::move(boxes)};
}

}  // namespace wheatdet
