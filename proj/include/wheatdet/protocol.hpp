#pragma once

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "wheatdet/augment.hpp"
#include "wheatdet/core.hpp"
#include "wheatdet/transforms.hpp"

namespace wheatdet
{

/// Detections keyed by image id, ordered for reproducible output.
using PredictionMap = std::map<std::string, std::vector<Detection>>;

class FormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path + "'");
  }
  out << text;
}

// Predictions file: one JSON object per line,
// {"image_id": str, "detections": [{"x1","y1","x2","y2","score"}]}.

inline std::string serialize_predictions(const PredictionMap& preds)
{
  std::string out;
  for (const auto& [id, dets] : preds) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : dets) {
      arr.push_back({{"x1", d.box.x1()}, {"y1", d.box.y1()}, {"x2", d.box.x2()},
          {"y2", d.box.y2()}, {"score", d.score}});
    }
    nlohmann::json line = {{"image_id", id}, {"detections", std::move(arr)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

/// Parse a predictions file. Repeated image ids append. Boxes are absolute,
/// or normalized when @p space says so.
inline PredictionMap parse_predictions(const std::string& text, Space space = Space::absolute)
{
  PredictionMap preds;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      auto& dets = preds[j.at("image_id").get<std::string>()];
      for (const auto& d : j.at("detections")) {
        dets.emplace_back(Box(d.at("x1").get<double>(), d.at("y1").get<double>(),
            d.at("x2").get<double>(), d.at("y2").get<double>(), space),
          d.at("score").get<double>());
      }
    } catch (const std::exception& e) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

/// One image entry of a request manifest. TTA views carry the id of the
/// image they were derived from and the orientation tag.
struct ManifestImage
{
  std::string id;
  std::string path;
  int width = 0;
  int height = 0;
  std::string source;
  std::optional<std::string> base_id;
  std::optional<OrientationTransform> view;

  bool operator==(const ManifestImage&) const = default;
};

enum class RequestMode
{
  train,
  predict
};

struct RequestManifest
{
  RequestMode mode = RequestMode::predict;
  std::vector<ManifestImage> images;
  std::string annotations;
  std::string output;
  int epochs = 0;

  bool operator==(const RequestManifest&) const = default;
};

inline std::string serialize_manifest(const RequestManifest& m)
{
  nlohmann::json images = nlohmann::json::array();
  for (const auto& im : m.images) {
    nlohmann::json e = {{"id", im.id}, {"path", im.path}, {"width", im.width},
      {"height", im.height}, {"source", im.source}};
    if (im.base_id) {
      e["base_id"] = *im.base_id;
    }
    if (im.view) {
      e["view"] = im.view->name();
    }
    images.push_back(std::move(e));
  }
  nlohmann::json j = {
    {"mode", m.mode == RequestMode::train ? "train" : "predict"},
    {"images", std::move(images)},
    {"output", m.output},
    {"epochs", m.epochs},
  };
  if (m.mode == RequestMode::train) {
    j["annotations"] = m.annotations;
  }
  return j.dump(2) + '\n';
}

inline RequestManifest parse_manifest(const std::string& text)
{
  try {
    const auto j = nlohmann::json::parse(text);
    RequestManifest m;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "train") {
      m.mode = RequestMode::train;
    } else if (mode == "predict") {
      m.mode = RequestMode::predict;
    } else {
      throw FormatError("unknown manifest mode '" + mode + "'");
    }
    for (const auto& e : j.at("images")) {
      ManifestImage im;
      im.id = e.at("id").get<std::string>();
      im.path = e.value("path", std::string{});
      im.width = e.at("width").get<int>();
      im.height = e.at("height").get<int>();
      im.source = e.value("source", std::string{});
      if (e.contains("base_id")) {
        im.base_id = e.at("base_id").get<std::string>();
      }
      if (e.contains("view")) {
        im.view = OrientationTransform::from_name(e.at("view").get<std::string>());
      }
      m.images.push_back(std::move(im));
    }
    m.annotations = j.value("annotations", std::string{});
    m.output = j.at("output").get<std::string>();
    m.epochs = j.value("epochs", 0);
    return m;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

// Augmentation policy document:
// {"name": str, "ops": [{"kind": str, "probability": p, "params": {...}}]}

inline void from_json(const nlohmann::json& j, AugParams& p)
{
  auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) {
        j.at(key).get_to(field);
      }
    };
  get("crop_min", p.crop_min);
  get("crop_max", p.crop_max);
  get("hue_shift", p.hue_shift);
  get("sat_shift", p.sat_shift);
  get("val_shift", p.val_shift);
  get("brightness_limit", p.brightness_limit);
  get("contrast_limit", p.contrast_limit);
  get("sigma_min", p.sigma_min);
  get("sigma_max", p.sigma_max);
  get("holes", p.holes);
  get("hole_min", p.hole_min);
  get("hole_max", p.hole_max);
  get("erase_area_min", p.erase_area_min);
  get("erase_area_max", p.erase_area_max);
  get("erase_aspect_min", p.erase_aspect_min);
  get("erase_aspect_max", p.erase_aspect_max);
  get("fill", p.fill);
  get("blur_min", p.blur_min);
  get("blur_max", p.blur_max);
  get("angle_min", p.angle_min);
  get("angle_max", p.angle_max);
  get("dim_min", p.dim_min);
  get("dim_max", p.dim_max);
  for (const auto& [key, value] : j.items()) {
    static const char* known[] = {"crop_min", "crop_max", "hue_shift", "sat_shift", "val_shift",
      "brightness_limit", "contrast_limit", "sigma_min", "sigma_max", "holes", "hole_min",
      "hole_max", "erase_area_min", "erase_area_max", "erase_aspect_min", "erase_aspect_max",
      "fill", "blur_min", "blur_max", "angle_min", "angle_max", "dim_min", "dim_max"};
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) {return key == k;})) {
      throw FormatError("unknown augmentation parameter '" + key + "'");
    }
  }
}

/// Parse a policy document; the result is validated.
inline AugmentationPolicy parse_policy(const std::string& text)
{
  AugmentationPolicy policy;
  try {
    const auto j = nlohmann::json::parse(text);
    policy.name = j.value("name", std::string{"custom"});
    for (const auto& e : j.at("ops")) {
      AugmentationOp op{aug_kind_from_string(e.at("kind").get<std::string>())};
      if (e.contains("params")) {
        from_json(e.at("params"), op.params);
      }
      policy.entries.push_back({op, e.at("probability").get<double>()});
    }
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("policy: ") + e.what());
  }
  policy.validate();
  return policy;
}

/// "G1"/"G2" resolve to the built-ins; anything else is read as a policy file.
inline AugmentationPolicy load_policy(const std::string& name_or_path)
{
  if (name_or_path == "G1" || name_or_path == "G2") {
    return builtin_policy(name_or_path);
  }
  return parse_policy(read_text_file(name_or_path));
}

}  // namespace wheatdet
