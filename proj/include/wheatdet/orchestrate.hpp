#pragma once

#include <chrono>
#include <csignal>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "wheatdet/core.hpp"
#include "wheatdet/data.hpp"
#include "wheatdet/fusion.hpp"
#include "wheatdet/protocol.hpp"
#include "wheatdet/raster.hpp"
#include "wheatdet/transforms.hpp"

namespace wheatdet
{

/// Failure of an external detector: non-zero exit, timeout, or a contract
/// violation in its output. `diagnostics` holds captured process output.
class AdapterError : public std::runtime_error
{
public:
  AdapterError(const std::string& what, std::string diagnostics = {})
  : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept {return diagnostics_;}

private:
  std::string diagnostics_;
};

/// Something that can be trained on a Dataset and asked for predictions.
class DetectorBackend
{
public:
  virtual ~DetectorBackend() = default;

  virtual void train(const Dataset& train_set, int epochs_hint) = 0;

  /// Predictions keyed by request id, in each request's own frame.
  virtual PredictionMap predict(const std::vector<ManifestImage>& requests) = 0;
};

/// External train/predict commands driven through request manifests.
struct DetectorAdapter
{
  /// Shell command templates. `{manifest}` expands to the manifest path and
  /// `{workdir}` to the work directory; without `{manifest}` the path is
  /// appended as the last argument.
  std::string train_command;
  std::string predict_command;
  std::filesystem::path workdir;
  double timeout_seconds = 600.0;
};

struct ProcessResult
{
  int exit_code = -1;
  bool timed_out = false;
  std::string output;
};

/// Run `sh -c command` with stdout and stderr captured to @p log_path.
inline ProcessResult run_command(const std::string& command, const std::filesystem::path& log_path,
  double timeout_seconds)
{
  const int log_fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (log_fd < 0) {
    throw AdapterError("cannot create log file '" + log_path.string() + "'");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(log_fd);
    throw AdapterError("fork failed");
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(log_fd, STDOUT_FILENO);
    ::dup2(log_fd, STDERR_FILENO);
    ::close(log_fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(log_fd);

  ProcessResult res;
  const auto deadline = std::chrono::steady_clock::now() +
    std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  auto delay = std::chrono::microseconds(200);
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      break;
    }
    if (r < 0) {
      throw AdapterError("waitpid failed");
    }
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      res.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(delay);
    delay = std::min(delay * 2, std::chrono::microseconds(20000));
  }
  if (!res.timed_out) {
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }
  try {
    res.output = read_text_file(log_path.string());
  } catch (const std::exception&) {
  }
  return res;
}

namespace detail
{
inline std::string expand_command(std::string cmd, const std::filesystem::path& manifest,
  const std::filesystem::path& workdir)
{
  auto replace_all = [&cmd](const std::string& key, const std::string& value) {
      bool found = false;
      for (std::size_t pos = cmd.find(key); pos != std::string::npos;
        pos = cmd.find(key, pos + value.size()))
      {
        cmd.replace(pos, key.size(), value);
        found = true;
      }
      return found;
    };
  replace_all("{workdir}", "'" + workdir.string() + "'");
  if (!replace_all("{manifest}", "'" + manifest.string() + "'")) {
    cmd += " '" + manifest.string() + "'";
  }
  return cmd;
}

inline std::string tail(const std::string& s, std::size_t n = 4000)
{
  return s.size() <= n ? s : s.substr(s.size() - n);
}
}  // namespace detail

/// DetectorBackend that exchanges files with external processes. One
/// invocation at a time; each gets a numbered manifest in the workdir.
class ProcessBackend : public DetectorBackend
{
public:
  explicit ProcessBackend(DetectorAdapter adapter)
  : adapter_(std::move(adapter))
  {
    if (adapter_.workdir.empty()) {
      throw std::invalid_argument("detector adapter needs a workdir");
    }
    std::filesystem::create_directories(adapter_.workdir);
  }

  void train(const Dataset& train_set, int epochs_hint) override
  {
    if (adapter_.train_command.empty()) {
      throw AdapterError("adapter has no train command");
    }
    const auto stem = next_stem("train");
    const auto ann = adapter_.workdir / (stem + ".csv");
    write_text_file(ann.string(), serialize_annotations(train_set));
    RequestManifest m;
    m.mode = RequestMode::train;
    for (const auto& r : train_set.records) {
      m.images.push_back({r.image_id, r.path, r.width, r.height, r.source, {}, {}});
    }
    m.annotations = ann.string();
    m.output = (adapter_.workdir / (stem + ".out")).string();
    m.epochs = epochs_hint;
    invoke(adapter_.train_command, m, stem);
  }

  PredictionMap predict(const std::vector<ManifestImage>& requests) override
  {
    if (adapter_.predict_command.empty()) {
      throw AdapterError("adapter has no predict command");
    }
    const auto stem = next_stem("predict");
    RequestManifest m;
    m.mode = RequestMode::predict;
    m.images = requests;
    m.output = (adapter_.workdir / (stem + ".jsonl")).string();
    const std::string log = invoke(adapter_.predict_command, m, stem);
    try {
      return parse_predictions(read_text_file(m.output));
    } catch (const std::exception& e) {
      throw AdapterError(std::string("unreadable predictions: ") + e.what(), log);
    }
  }

  const DetectorAdapter& adapter() const noexcept {return adapter_;}

private:
  std::string next_stem(const char* kind)
  {
    return std::string(kind) + "_" + std::to_string(++calls_);
  }

  std::string invoke(const std::string& tmpl, const RequestManifest& m, const std::string& stem)
  {
    const auto manifest = adapter_.workdir / (stem + ".manifest.json");
    write_text_file(manifest.string(), serialize_manifest(m));
    const auto cmd = detail::expand_command(tmpl, manifest, adapter_.workdir);
    const auto res = run_command(cmd, adapter_.workdir / (stem + ".log"), adapter_.timeout_seconds);
    if (res.timed_out) {
      throw AdapterError("adapter command timed out: " + cmd, detail::tail(res.output));
    }
    if (res.exit_code != 0) {
      throw AdapterError("adapter command exited with status " + std::to_string(res.exit_code) +
              ": " + cmd, detail::tail(res.output));
    }
    return detail::tail(res.output);
  }

  DetectorAdapter adapter_;
  int calls_ = 0;
};

inline ManifestImage manifest_entry(const ImageRecord& r)
{
  return {r.image_id, r.path, r.width, r.height, r.source, {}, {}};
}

namespace detail
{
inline void check_response(const PredictionMap& preds, const std::vector<ManifestImage>& requests)
{
  std::set<std::string> asked;
  for (const auto& r : requests) {
    asked.insert(r.id);
  }
  for (const auto& [id, dets] : preds) {
    if (asked.count(id) == 0) {
      throw AdapterError("detector returned predictions for unrequested image '" + id + "'");
    }
  }
}
}  // namespace detail

/// Predictions for @p images. Every requested id is present in the result
/// (possibly with no detections); unknown ids from the detector are an error.
inline PredictionMap predict(DetectorBackend& backend, const std::vector<ImageRecord>& images)
{
  std::vector<ManifestImage> requests;
  requests.reserve(images.size());
  for (const auto& r : images) {
    requests.push_back(manifest_entry(r));
  }
  auto preds = backend.predict(requests);
  detail::check_response(preds, requests);
  for (const auto& r : requests) {
    preds[r.id];
  }
  return preds;
}

/// Request id of a TTA view, e.g. "img7@hr".
inline std::string view_id(const std::string& base_id, const OrientationTransform& t)
{
  return base_id + "@" + t.name();
}

/**
 * @brief Predict the 8 orientation views of one image and fuse them back
 *        into the original frame.
 * @details When the image has pixels on disk, each view is written as a PPM
 *          under @p view_dir and the request points at it.
 */
inline std::vector<Detection> tta_predict(DetectorBackend& backend, const ImageRecord& image,
  const FusionConfig& config, const std::filesystem::path& view_dir = {})
{
  std::optional<Image> pixels;
  if (!image.path.empty()) {
    if (view_dir.empty()) {
      throw std::invalid_argument("tta_predict needs a view directory for image pixels");
    }
    std::filesystem::create_directories(view_dir);
    pixels = read_ppm(image.path);
  }
  std::vector<ManifestImage> requests;
  for (const auto& t : tta_views()) {
    const auto [w, h] = t.output_size(image.width, image.height);
    ManifestImage req{view_id(image.image_id, t), {}, w, h, image.source, image.image_id, t};
    if (pixels) {
      const auto path = view_dir / (req.id + ".ppm");
      write_ppm(path.string(), apply_to_image(t, *pixels));
      req.path = path.string();
    }
    requests.push_back(std::move(req));
  }
  auto preds = backend.predict(requests);
  detail::check_response(preds, requests);

  std::vector<ViewPredictions> views;
  for (const auto& req : requests) {
    auto it = preds.find(req.id);
    views.push_back({*req.view, it == preds.end() ? std::vector<Detection>{} : it->second});
  }
  return fuse_tta(views, image.width, image.height, config);
}

struct PseudoLabelConfig
{
  int rounds = 1;
  double confidence_threshold = 0.5;
  int epochs_hint = 1;
  /// When set, each round's training set is written here as round_<r>.csv.
  std::filesystem::path history_dir{};
};

struct PseudoLabelResult
{
  /// history[r] is the training set built from round r+1's predictions.
  std::vector<Dataset> history;
  /// Predictions from the extra predict call after the final round.
  PredictionMap final_predictions;
};

/// Test images relabeled with detections scoring at least @p threshold.
/// Images left without boxes are omitted.
inline std::vector<ImageRecord> pseudo_label(const std::vector<ImageRecord>& test_images,
  const PredictionMap& preds, double threshold)
{
  std::vector<ImageRecord> out;
  for (const auto& img : test_images) {
    ImageRecord rec = img;
    rec.boxes.clear();
    auto it = preds.find(img.image_id);
    if (it != preds.end()) {
      for (const auto& d : it->second) {
        if (d.score < threshold) {
          continue;
        }
        if (auto b = clip(d.box, img.width, img.height)) {
          rec.boxes.push_back(*b);
        }
      }
    }
    if (!rec.boxes.empty()) {
      out.push_back(std::move(rec));
    }
  }
  return out;
}

/**
 * @brief Iterative pseudo-labeling.
 * @details Round r trains on the current set, predicts the test images and
 *          sets the next training set to the original training images plus
 *          the confidently pseudo-labeled test images. One more prediction
 *          follows the final round: `rounds` train calls, `rounds + 1`
 *          predict calls. Adapter errors propagate; rounds already written
 *          to history_dir stay there.
 */
inline PseudoLabelResult pseudo_label_rounds(const Dataset& train, const std::vector<ImageRecord>& test_images,
  DetectorBackend& backend, const PseudoLabelConfig& config)
{
  if (config.rounds < 1) {
    throw std::invalid_argument("pseudo labeling needs at least one round");
  }
  if (!(config.confidence_threshold >= 0.0 && config.confidence_threshold <= 1.0)) {
    throw std::invalid_argument("confidence threshold must lie in [0,1]");
  }
  for (const auto& t : test_images) {
    if (train.find(t.image_id) != nullptr) {
      throw std::invalid_argument("test image '" + t.image_id + "' is also a training image");
    }
  }
  if (!config.history_dir.empty()) {
    std::filesystem::create_directories(config.history_dir);
  }

  PseudoLabelResult result;
  Dataset current = train;
  for (int round = 1; round <= config.rounds; ++round) {
    backend.train(current, config.epochs_hint);
    const auto preds = predict(backend, test_images);
    Dataset next = train;
    for (auto& rec : pseudo_label(test_images, preds, config.confidence_threshold)) {
      next.records.push_back(std::move(rec));
    }
    if (!config.history_dir.empty()) {
      write_text_file((config.history_dir / ("round_" + std::to_string(round) + ".csv")).string(),
        serialize_annotations(next));
    }
    result.history.push_back(next);
    current = std::move(next);
  }
  result.final_predictions = predict(backend, test_images);
  return result;
}

}  // namespace wheatdet
