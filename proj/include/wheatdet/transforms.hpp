#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <utility>

#include "wheatdet/core.hpp"
#include "wheatdet/raster.hpp"

namespace wheatdet
{

/**
 * @brief One of the 8 orientation transforms generated by horizontal flip,
 *        vertical flip and a quarter turn.
 * @details Application order is fixed: horizontal flip, then vertical flip,
 *          then the counter-clockwise quarter turn. With image coordinates
 *          (y pointing down) a quarter turn maps (x, y) in a W x H frame to
 *          (y, W - x) in an H x W frame.
 */
struct OrientationTransform
{
  bool hflip = false;
  bool vflip = false;
  bool rot90 = false;

  bool operator==(const OrientationTransform&) const = default;

  bool is_identity() const noexcept {return !hflip && !vflip && !rot90;}

  /// Frame size after the transform.
  std::pair<int, int> output_size(int width, int height) const noexcept
  {
    return rot90 ? std::pair{height, width} : std::pair{width, height};
  }

  /// Compact tag such as "id", "h", "hv", "vr" (r = quarter turn).
  std::string name() const
  {
    if (is_identity()) {
      return "id";
    }
    std::string s;
    if (hflip) {s += 'h';}
    if (vflip) {s += 'v';}
    if (rot90) {s += 'r';}
    return s;
  }

  static OrientationTransform from_name(const std::string& s)
  {
    OrientationTransform t;
    if (s == "id") {
      return t;
    }
    for (char c : s) {
      switch (c) {
        case 'h': t.hflip = true; break;
        case 'v': t.vflip = true; break;
        case 'r': t.rot90 = true; break;
        default: throw std::invalid_argument("bad orientation tag '" + s + "'");
      }
    }
    return t;
  }
};

namespace detail
{
struct Point
{
  double x, y;
};

inline Point map_point(const OrientationTransform& t, Point p, double w, double h) noexcept
{
  if (t.hflip) {p.x = w - p.x;}
  if (t.vflip) {p.y = h - p.y;}
  if (t.rot90) {p = Point{p.y, w - p.x};}
  return p;
}
}  // namespace detail

struct TransformedBox
{
  Box box;
  int width;
  int height;
};

inline TransformedBox apply_to_box(
  const OrientationTransform& t, const Box& b, int width, int height)
{
  if (b.space() != Space::absolute) {
    throw std::invalid_argument("orientation transforms act on absolute boxes");
  }
  if (width <= 0 || height <= 0 || b.x1() < 0.0 || b.y1() < 0.0 ||
    b.x2() > width || b.y2() > height)
  {
    throw std::invalid_argument("box outside frame");
  }
  const auto p = detail::map_point(t, {b.x1(), b.y1()}, width, height);
  const auto q = detail::map_point(t, {b.x2(), b.y2()}, width, height);
  const auto [nw, nh] = t.output_size(width, height);
  return {Box(std::min(p.x, q.x), std::min(p.y, q.y), std::max(p.x, q.x), std::max(p.y, q.y)),
    nw, nh};
}

/// The reflections are involutions; the two pure quarter turns swap.
inline OrientationTransform inverse(const OrientationTransform& t) noexcept
{
  if (t.rot90 && t.hflip == t.vflip) {
    return {!t.hflip, !t.vflip, true};
  }
  return t;
}

/// Identity first, then the remaining 7 elements in (hflip, vflip, rot90)
/// binary counting order.
inline std::array<OrientationTransform, 8> tta_views() noexcept
{
  std::array<OrientationTransform, 8> views{};
  for (int i = 0; i < 8; ++i) {
    views[i] = {(i & 1) != 0, (i & 2) != 0, (i & 4) != 0};
  }
  return views;
}

/// Pixel permutation matching apply_to_box: the pixel with center (x+.5, y+.5)
/// moves to the pixel containing the mapped center.
inline Image apply_to_image(const OrientationTransform& t, const Image& img)
{
  if (img.empty()) {
    throw std::invalid_argument("empty image");
  }
  const int w = img.width();
  const int h = img.height();
  const auto [nw, nh] = t.output_size(w, h);
  Image out(nw, nh);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sx = t.hflip ? w - 1 - x : x;
      int sy = t.vflip ? h - 1 - y : y;
      if (t.rot90) {
        const int rx = sy;
        const int ry = w - 1 - sx;
        sx = rx;
        sy = ry;
      }
      for (int c = 0; c < Image::channels; ++c) {
        out.at(sx, sy, c) = img.at(x, y, c);
      }
    }
  }
  return out;
}

}  // namespace wheatdet
