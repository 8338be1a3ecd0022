#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace wheatdet
{

/// Coordinate space a box lives in. Absolute boxes are in pixels of some
/// frame; normalized boxes are divided by the frame size and lie in [0,1].
enum class Space
{
  absolute,
  normalized
};

inline const char* to_string(Space s)
{
  return s == Space::absolute ? "absolute" : "normalized";
}

/**
 * @brief Axis-aligned box in corner form (x1, y1, x2, y2).
 * @details Width and height are strictly positive. Degenerate boxes are
 *          rejected by the constructor with std::invalid_argument.
 */
class Box
{
public:
  Box(double x1, double y1, double x2, double y2, Space space = Space::absolute)
  : x1_(x1), y1_(y1), x2_(x2), y2_(y2), space_(space)
  {
    if (!(x1 < x2) || !(y1 < y2)) {
      throw std::invalid_argument(
        "degenerate box [" + std::to_string(x1) + ", " + std::to_string(y1) + ", " +
        std::to_string(x2) + ", " + std::to_string(y2) + "]");
    }
    if (space == Space::normalized &&
      (x1 < 0.0 || y1 < 0.0 || x2 > 1.0 || y2 > 1.0))
    {
      throw std::invalid_argument("normalized box coordinates outside [0,1]");
    }
  }

  /// Build from the (x, y, w, h) layout used by annotation files.
  static Box from_xywh(double x, double y, double w, double h, Space space = Space::absolute)
  {
    return Box(x, y, x + w, y + h, space);
  }

  double x1() const noexcept {return x1_;}
  double y1() const noexcept {return y1_;}
  double x2() const noexcept {return x2_;}
  double y2() const noexcept {return y2_;}
  Space space() const noexcept {return space_;}

  double width() const noexcept {return x2_ - x1_;}
  double height() const noexcept {return y2_ - y1_;}

  bool operator==(const Box&) const = default;

private:
  double x1_, y1_, x2_, y2_;
  Space space_;
};

/// Box plus confidence. `origin` is a free-form provenance tag such as a
/// model id or TTA view id; it never takes part in geometry.
struct Detection
{
  Box box;
  double score;
  std::string origin{};

  Detection(Box b, double s, std::string o = {})
  : box(b), score(s), origin(std::move(o))
  {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw std::invalid_argument("detection score outside [0,1]: " + std::to_string(s));
    }
  }

  bool operator==(const Detection&) const = default;
};

struct ImageRecord
{
  std::string image_id;
  int width = 0;
  int height = 0;
  std::string source;
  std::vector<Box> boxes;
  /// Optional path to pixels on disk (binary PPM). Empty when annotation-only.
  std::string path{};

  bool operator==(const ImageRecord&) const = default;
};

/// Throws std::invalid_argument when a record breaks the frame or id invariants.
inline void validate(const ImageRecord& rec)
{
  if (rec.width <= 0 || rec.height <= 0) {
    throw std::invalid_argument("image '" + rec.image_id + "' has non-positive size");
  }
  for (const auto& b : rec.boxes) {
    if (b.space() != Space::absolute || b.x1() < 0.0 || b.y1() < 0.0 ||
      b.x2() > rec.width || b.y2() > rec.height)
    {
      throw std::invalid_argument("box outside frame of image '" + rec.image_id + "'");
    }
  }
}

struct Dataset
{
  std::vector<ImageRecord> records;

  std::size_t box_count() const
  {
    std::size_t n = 0;
    for (const auto& r : records) {
      n += r.boxes.size();
    }
    return n;
  }

  const ImageRecord* find(const std::string& id) const
  {
    for (const auto& r : records) {
      if (r.image_id == id) {
        return &r;
      }
    }
    return nullptr;
  }

  bool operator==(const Dataset&) const = default;
};

inline void validate(const Dataset& d)
{
  std::unordered_set<std::string> seen;
  for (const auto& r : d.records) {
    validate(r);
    if (!seen.insert(r.image_id).second) {
      throw std::invalid_argument("duplicate image_id '" + r.image_id + "'");
    }
  }
}

inline double area(const Box& b) noexcept
{
  return b.width() * b.height();
}

inline double intersection_area(const Box& a, const Box& b) noexcept
{
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline double iou(const Box& a, const Box& b)
{
  if (a.space() != b.space()) {
    throw std::invalid_argument("iou of boxes in different coordinate spaces");
  }
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = area(a) + area(b) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace detail
{
inline void check_dims(double width, double height)
{
  if (!(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
}
}  // namespace detail

inline Box normalize(const Box& b, double width, double height)
{
  detail::check_dims(width, height);
  if (b.space() != Space::absolute) {
    throw std::invalid_argument("normalize expects an absolute box");
  }
  return Box(b.x1() / width, b.y1() / height, b.x2() / width, b.y2() / height, Space::normalized);
}

inline Box denormalize(const Box& b, double width, double height)
{
  detail::check_dims(width, height);
  if (b.space() != Space::normalized) {
    throw std::invalid_argument("denormalize expects a normalized box");
  }
  return Box(b.x1() * width, b.y1() * height, b.x2() * width, b.y2() * height, Space::absolute);
}

/// Intersection with [0,width]x[0,height]; nullopt when nothing of positive
/// area remains.
inline std::optional<Box> clip(const Box& b, double width, double height)
{
  const double x1 = std::max(b.x1(), 0.0);
  const double y1 = std::max(b.y1(), 0.0);
  const double x2 = std::min(b.x2(), width);
  const double y2 = std::min(b.y2(), height);
  if (!(x1 < x2) || !(y1 < y2)) {
    return std::nullopt;
  }
  return Box(x1, y1, x2, y2, b.space());
}

inline std::ostream& operator<<(std::ostream& os, const Box& b)
{
  return os << '[' << b.x1() << ", " << b.y1() << ", " << b.x2() << ", " << b.y2() << ']' <<
         (b.space() == Space::normalized ? "n" : "");
}

inline std::ostream& operator<<(std::ostream& os, const Detection& d)
{
  return os << d.box << '@' << d.score;
}

/// Strict weak order on box coordinates, used as the deterministic tie-break.
inline bool coord_less(const Box& a, const Box& b) noexcept
{
  if (a.x1() != b.x1()) {return a.x1() < b.x1();}
  if (a.y1() != b.y1()) {return a.y1() < b.y1();}
  if (a.x2() != b.x2()) {return a.x2() < b.x2();}
  return a.y2() < b.y2();
}

}  // namespace wheatdet
