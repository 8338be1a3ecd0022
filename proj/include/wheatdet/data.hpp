#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wheatdet/core.hpp"

namespace wheatdet
{

/// Annotation input that violates the file grammar. `line` is 1-based and
/// counts the header.
class ParseError : public std::runtime_error
{
public:
  ParseError(std::size_t line, const std::string& what)
  : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept {return line_;}

private:
  std::size_t line_;
};

namespace detail
{

inline std::vector<std::string> split_csv_line(std::string_view line)
{
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  int bracket = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == '[') {
      ++bracket;
      cur.push_back(c);
    } else if (c == ']') {
      --bracket;
      cur.push_back(c);
    } else if (c == ',' && bracket == 0) {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

/// Unsigned decimal real: digits with an optional fractional part.
inline bool parse_real(std::string_view s, std::size_t& pos, double& out)
{
  const std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {++pos;}
  if (pos == start) {
    return false;
  }
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t frac = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {++pos;}
    if (pos == frac) {
      return false;
    }
  }
  auto res = std::from_chars(s.data() + start, s.data() + pos, out);
  return res.ec == std::errc{};
}

inline bool expect(std::string_view s, std::size_t& pos, std::string_view lit)
{
  if (s.substr(pos, lit.size()) != lit) {
    return false;
  }
  pos += lit.size();
  return true;
}

inline int parse_dim(const std::string& cell, std::size_t line, const char* name)
{
  int v = 0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || v <= 0) {
    throw ParseError(line, std::string("invalid ") + name + " '" + cell + "'");
  }
  return v;
}

/// Shortest round-trip decimal; integral values keep a trailing ".0".
inline std::string format_real(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) {
    s += ".0";
  }
  return s;
}

}  // namespace detail

/// Parse a bbox cell of the form "[x, y, w, h]". Returns nullopt for the
/// empty-image marker "[]".
inline std::optional<Box> parse_bbox_cell(std::string_view cell, std::size_t line)
{
  if (cell == "[]") {
    return std::nullopt;
  }
  double v[4];
  std::size_t pos = 0;
  bool ok = detail::expect(cell, pos, "[");
  for (int i = 0; ok && i < 4; ++i) {
    if (i > 0) {
      ok = detail::expect(cell, pos, ", ");
    }
    ok = ok && detail::parse_real(cell, pos, v[i]);
  }
  ok = ok && detail::expect(cell, pos, "]") && pos == cell.size();
  if (!ok) {
    throw ParseError(line, "malformed bbox cell '" + std::string(cell) + "'");
  }
  if (!(v[2] > 0.0) || !(v[3] > 0.0)) {
    throw ParseError(line, "bbox with zero width or height '" + std::string(cell) + "'");
  }
  return Box::from_xywh(v[0], v[1], v[2], v[3]);
}

/**
 * @brief Parse the `image_id,width,height,bbox,source` annotation table.
 * @param csv         Whole file contents, header included.
 * @param image_list  Images known to exist; those without rows become
 *                    records with no boxes.
 */
inline Dataset parse_annotations(std::string_view csv,
  const std::vector<ImageRecord>& image_list = {})
{
  Dataset d;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) {
      end = csv.size();
    }
    std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty()) {
      continue;
    }
    auto cells = detail::split_csv_line(line);
    if (!header_seen) {
      header_seen = true;
      if (cells != std::vector<std::string>{"image_id", "width", "height", "bbox", "source"}) {
        throw ParseError(line_no, "expected header image_id,width,height,bbox,source");
      }
      continue;
    }
    if (cells.size() != 5) {
      throw ParseError(line_no, "expected 5 cells, found " + std::to_string(cells.size()));
    }
    const int w = detail::parse_dim(cells[1], line_no, "width");
    const int h = detail::parse_dim(cells[2], line_no, "height");
    const auto box = parse_bbox_cell(cells[3], line_no);

    auto [it, inserted] = index.try_emplace(cells[0], d.records.size());
    if (inserted) {
      d.records.push_back(ImageRecord{cells[0], w, h, cells[4], {}});
    }
    auto& rec = d.records[it->second];
    if (rec.width != w || rec.height != h || rec.source != cells[4]) {
      throw ParseError(line_no, "inconsistent size or source for image '" + cells[0] + "'");
    }
    if (box) {
      if (box->x1() < 0.0 || box->y1() < 0.0 || box->x2() > w || box->y2() > h) {
        throw ParseError(line_no, "bbox exceeds the " + cells[1] + "x" + cells[2] + " frame");
      }
      rec.boxes.push_back(*box);
    }
  }
  if (!header_seen) {
    throw ParseError(1, "missing header");
  }
  for (const auto& extra : image_list) {
    if (index.count(extra.image_id) == 0) {
      index.emplace(extra.image_id, d.records.size());
      d.records.push_back(ImageRecord{extra.image_id, extra.width, extra.height,
          extra.source, {}, extra.path});
    }
  }
  return d;
}

/// Parse an image listing with header `image_id,width,height,source` and an
/// optional trailing `path` column. Records carry no boxes.
inline std::vector<ImageRecord> parse_image_list(std::string_view csv)
{
  std::vector<ImageRecord> out;
  std::unordered_map<std::string, bool> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::size_t columns = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) {
      end = csv.size();
    }
    std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty()) {
      continue;
    }
    auto cells = detail::split_csv_line(line);
    if (columns == 0) {
      const std::vector<std::string> base{"image_id", "width", "height", "source"};
      auto with_path = base;
      with_path.push_back("path");
      if (cells != base && cells != with_path) {
        throw ParseError(line_no, "expected header image_id,width,height,source[,path]");
      }
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns) {
      throw ParseError(line_no, "expected " + std::to_string(columns) + " cells, found " +
              std::to_string(cells.size()));
    }
    if (!seen.emplace(cells[0], true).second) {
      throw ParseError(line_no, "duplicate image_id '" + cells[0] + "'");
    }
    ImageRecord r{cells[0], detail::parse_dim(cells[1], line_no, "width"),
      detail::parse_dim(cells[2], line_no, "height"), cells[3], {}};
    if (columns == 5) {
      r.path = cells[4];
    }
    out.push_back(std::move(r));
  }
  if (columns == 0) {
    throw ParseError(1, "missing header");
  }
  return out;
}

inline std::string serialize_image_list(const std::vector<ImageRecord>& images)
{
  const bool paths = std::any_of(images.begin(), images.end(),
      [](const ImageRecord& r) {return !r.path.empty();});
  std::string out = paths ? "image_id,width,height,source,path\n" :
    "image_id,width,height,source\n";
  for (const auto& r : images) {
    out += r.image_id + ',' + std::to_string(r.width) + ',' + std::to_string(r.height) + ',' +
      r.source;
    if (paths) {
      out += ',' + r.path;
    }
    out += '\n';
  }
  return out;
}

/// Inverse of parse_annotations. Images without boxes are written as a
/// single row with the "[]" marker so they survive a round trip.
inline std::string serialize_annotations(const Dataset& d)
{
  std::string out = "image_id,width,height,bbox,source\n";
  auto row = [&](const ImageRecord& r, const std::string& cell) {
      out += r.image_id + ',' + std::to_string(r.width) + ',' + std::to_string(r.height) +
        ",\"" + cell + "\"," + r.source + '\n';
    };
  for (const auto& r : d.records) {
    if (r.boxes.empty()) {
      row(r, "[]");
    }
    for (const auto& b : r.boxes) {
      row(r, "[" + detail::format_real(b.x1()) + ", " + detail::format_real(b.y1()) + ", " +
        detail::format_real(b.width()) + ", " + detail::format_real(b.height()) + "]");
    }
  }
  return out;
}

/// Fixed-edge histogram; bucket i counts values in [edges[i], edges[i+1]),
/// the final bucket is open-ended.
struct Histogram
{
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  explicit Histogram(std::vector<double> e = {})
  : edges(std::move(e)), counts(edges.size(), 0) {}

  void add(double v)
  {
    if (edges.empty()) {
      return;
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t i = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    ++counts[i];
  }

  bool operator==(const Histogram&) const = default;
};

struct DatasetStats
{
  std::size_t image_count = 0;
  std::size_t box_count = 0;
  std::size_t unlabeled_image_count = 0;
  Histogram boxes_per_image{{0, 1, 10, 20, 30, 40, 50, 60, 80, 100, 150}};
  Histogram box_area{{0, 256, 1024, 2304, 4096, 9216, 16384, 65536}};
  Histogram covered_fraction{{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}};
  std::map<std::string, std::size_t> per_source;
  /// Per image, in dataset order.
  std::vector<double> covered_fractions;
};

/// Covered fraction counts overlapping boxes twice (sum of areas over image
/// area), capped at 1.
inline double covered_fraction(const ImageRecord& r)
{
  double sum = 0.0;
  for (const auto& b : r.boxes) {
    sum += area(b);
  }
  return std::min(1.0, sum / (static_cast<double>(r.width) * r.height));
}

inline DatasetStats stats(const Dataset& d)
{
  DatasetStats s;
  s.image_count = d.records.size();
  for (const auto& r : d.records) {
    s.box_count += r.boxes.size();
    if (r.boxes.empty()) {
      ++s.unlabeled_image_count;
    }
    s.boxes_per_image.add(static_cast<double>(r.boxes.size()));
    for (const auto& b : r.boxes) {
      s.box_area.add(area(b));
    }
    const double cf = covered_fraction(r);
    s.covered_fraction.add(cf);
    s.covered_fractions.push_back(cf);
    ++s.per_source[r.source];
  }
  return s;
}

inline std::string format_stats(const DatasetStats& s)
{
  std::ostringstream os;
  os << "images=" << s.image_count << '\n'
     << "boxes=" << s.box_count << '\n'
     << "unlabeled_images=" << s.unlabeled_image_count << '\n';
  auto hist = [&os](const char* name, const Histogram& h) {
      for (std::size_t i = 0; i < h.edges.size(); ++i) {
        os << name << '[' << h.edges[i];
        if (i + 1 < h.edges.size()) {
          os << ',' << h.edges[i + 1] << ")=";
        } else {
          os << ",inf)=";
        }
        os << h.counts[i] << '\n';
      }
    };
  hist("boxes_per_image", s.boxes_per_image);
  hist("box_area", s.box_area);
  hist("covered_fraction", s.covered_fraction);
  for (const auto& [src, n] : s.per_source) {
    os << "source." << src << '=' << n << '\n';
  }
  return os.str();
}

struct CleaningReport
{
  std::size_t removed_tiny = 0;
  std::size_t removed_huge = 0;
  std::size_t removed_unlabeled_images = 0;
  double min_area = 0.0;
  double max_area = 0.0;
  std::size_t images_before = 0;
  std::size_t images_after = 0;
  std::size_t boxes_before = 0;
  std::size_t boxes_after = 0;
};

inline constexpr double default_min_area = 50.0;
inline constexpr double default_max_area = 200000.0;

/// Remove boxes whose area falls outside [min_area, max_area]; optionally
/// drop images left without boxes. Idempotent.
inline std::pair<Dataset, CleaningReport> clean(const Dataset& d,
  double min_area = default_min_area, double max_area = default_max_area,
  bool drop_empty_images = true)
{
  if (!(min_area > 0.0) || !(min_area < max_area)) {
    throw std::invalid_argument("cleaning requires 0 < min_area < max_area");
  }
  CleaningReport rep;
  rep.min_area = min_area;
  rep.max_area = max_area;
  rep.images_before = d.records.size();
  rep.boxes_before = d.box_count();
  Dataset out;
  for (const auto& r : d.records) {
    ImageRecord kept = r;
    kept.boxes.clear();
    for (const auto& b : r.boxes) {
      const double a = area(b);
      if (a < min_area) {
        ++rep.removed_tiny;
      } else if (a > max_area) {
        ++rep.removed_huge;
      } else {
        kept.boxes.push_back(b);
      }
    }
    if (drop_empty_images && kept.boxes.empty()) {
      ++rep.removed_unlabeled_images;
      continue;
    }
    out.records.push_back(std::move(kept));
  }
  rep.images_after = out.records.size();
  rep.boxes_after = out.box_count();
  return {std::move(out), rep};
}

inline std::string format_report(const CleaningReport& r)
{
  std::ostringstream os;
  os << "min_area=" << r.min_area << '\n'
     << "max_area=" << r.max_area << '\n'
     << "removed_tiny=" << r.removed_tiny << '\n'
     << "removed_huge=" << r.removed_huge << '\n'
     << "removed_unlabeled_images=" << r.removed_unlabeled_images << '\n'
     << "images_before=" << r.images_before << '\n'
     << "images_after=" << r.images_after << '\n'
     << "boxes_before=" << r.boxes_before << '\n'
     << "boxes_after=" << r.boxes_after << '\n';
  return os.str();
}

struct FoldAssignment
{
  int k = 0;
  /// Fold index per image, in dataset order.
  std::vector<std::pair<std::string, int>> assignment;

  bool operator==(const FoldAssignment&) const = default;

  int fold_of(const std::string& id) const
  {
    for (const auto& [img, f] : assignment) {
      if (img == id) {
        return f;
      }
    }
    throw std::out_of_range("image '" + id + "' not in fold assignment");
  }
};

/// Quantile bin (0..bins-1) of each image's box count. Equal counts share a bin.
inline std::vector<int> density_bins(const Dataset& d, int bins)
{
  std::vector<std::size_t> counts;
  for (const auto& r : d.records) {
    counts.push_back(r.boxes.size());
  }
  std::vector<std::size_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> cuts;
  for (int i = 1; i < bins; ++i) {
    cuts.push_back(sorted[sorted.size() * static_cast<std::size_t>(i) / bins]);
  }
  std::vector<int> out;
  for (auto c : counts) {
    out.push_back(static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), c) - cuts.begin()));
  }
  return out;
}

/**
 * @brief Stratified k-fold assignment over (source, box-density bin).
 * @details Each stratum is shuffled with @p seed and dealt round-robin; the
 *          dealing position carries over between strata so fold sizes also
 *          stay balanced overall.
 */
inline FoldAssignment stratified_kfold(const Dataset& d, int k, int bins, std::uint64_t seed)
{
  if (k < 2) {
    throw std::invalid_argument("k must be at least 2");
  }
  if (bins < 1) {
    throw std::invalid_argument("density_bins must be at least 1");
  }
  if (d.records.empty()) {
    throw std::invalid_argument("cannot split an empty dataset");
  }
  if (static_cast<std::size_t>(k) > d.records.size()) {
    throw std::invalid_argument("k exceeds the number of images");
  }
  const auto bin = density_bins(d, bins);
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    strata[{d.records[i].source, bin[i]}].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold(d.records.size(), 0);
  int next = 0;
  for (auto& [key, members] : strata) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) {
      fold[i] = next;
      next = (next + 1) % k;
    }
  }
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    fa.assignment.emplace_back(d.records[i].image_id, fold[i]);
  }
  return fa;
}

inline std::string serialize_folds(const FoldAssignment& fa)
{
  std::string out = "image_id,fold\n";
  for (const auto& [id, f] : fa.assignment) {
    out += id + ',' + std::to_string(f) + '\n';
  }
  return out;
}

/// Images of @p d whose fold equals (or differs from, when @p invert) @p fold.
inline Dataset select_fold(const Dataset& d, const FoldAssignment& fa, int fold, bool invert = false)
{
  Dataset out;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    if ((fa.assignment.at(i).second == fold) != invert) {
      out.records.push_back(d.records[i]);
    }
  }
  return out;
}

/**
 * @brief Subsets for bagging: each is ceil(fraction * |d|) images drawn
 *        without replacement, kept in dataset order.
 */
inline std::vector<Dataset> bagging_subsets(const Dataset& d, int n_models, double fraction,
  std::uint64_t seed)
{
  if (d.records.empty()) {
    throw std::invalid_argument("cannot subsample an empty dataset");
  }
  if (n_models < 1) {
    throw std::invalid_argument("n_models must be at least 1");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("fraction must lie in (0,1]");
  }
  const std::size_t n = d.records.size();
  const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
  std::vector<Dataset> out;
  for (int m = 0; m < n_models; ++m) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(m)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    Dataset sub;
    for (auto i : idx) {
      sub.records.push_back(d.records[i]);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace wheatdet
