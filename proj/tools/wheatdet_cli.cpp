// wheatdet: command-line front end for the detection pipeline stages.
//
// Exit status: 0 success, 1 usage error, 2 data or adapter error.

#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wheatdet/wheatdet.hpp"

namespace fs = std::filesystem;
using namespace wheatdet;

namespace
{

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Globals
{
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  unsigned workers = 1;
  bool verbose = false;
};

/// Collects `key=value` pairs for the one-line summary.
class Summary
{
public:
  template<class T>
  Summary& add(const std::string& key, const T& value)
  {
    std::ostringstream os;
    if constexpr (std::is_floating_point_v<T>) {
      os << detail::format_real(value);
    } else {
      os << value;
    }
    parts_.push_back(key + "=" + os.str());
    return *this;
  }

  /// Printed on stdout, or stderr when stdout carries the data output.
  void print(bool data_on_stdout) const
  {
    std::ostream& os = data_on_stdout ? std::cerr : std::cout;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      os << (i ? " " : "") << parts_[i];
    }
    os << '\n';
  }

private:
  std::vector<std::string> parts_;
};

std::uint64_t resolve_seed(Globals& g)
{
  if (g.seed_opt->count() == 0) {
    std::random_device rd;
    g.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  return g.seed;
}

void log(const Globals& g, const std::string& msg)
{
  if (g.verbose) {
    std::cerr << "wheatdet: " << msg << '\n';
  }
}

void write_output(const std::string& path, const std::string& text)
{
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text_file(path, text);
  }
}

/// Outputs may never overwrite an input file.
void guard_outputs(const std::vector<std::string>& inputs, const std::vector<std::string>& outputs)
{
  for (const auto& out : outputs) {
    if (out.empty() || out == "-") {
      continue;
    }
    for (const auto& in : inputs) {
      if (!in.empty() && fs::exists(in) && fs::exists(out) && fs::equivalent(in, out)) {
        throw UsageError("output '" + out + "' would overwrite input '" + in + "'");
      }
    }
  }
}

Dataset load_annotations(const std::string& ann, const std::string& images = {})
{
  std::vector<ImageRecord> listing;
  if (!images.empty()) {
    listing = parse_image_list(read_text_file(images));
  }
  Dataset d = parse_annotations(read_text_file(ann), listing);
  // Listed paths win over the annotation table, which has no path column.
  for (const auto& l : listing) {
    for (auto& r : d.records) {
      if (r.image_id == l.image_id && r.path.empty()) {
        r.path = l.path;
      }
    }
  }
  return d;
}

/// Images to run inference on: an image list, or the images of an annotation table.
std::vector<ImageRecord> load_request_images(const std::string& images, const std::string& ann)
{
  if (!images.empty() && !ann.empty()) {
    throw UsageError("give either --images or --ann, not both");
  }
  if (!images.empty()) {
    return parse_image_list(read_text_file(images));
  }
  if (!ann.empty()) {
    auto d = parse_annotations(read_text_file(ann));
    for (auto& r : d.records) {
      r.boxes.clear();
    }
    return d.records;
  }
  throw UsageError("one of --images or --ann is required");
}

PredictionMap read_predictions(const std::string& path)
{
  return parse_predictions(read_text_file(path));
}

struct FusionFlags
{
  double iou = 0.55;
  double skip = 0.0;
  std::string conf = "rescaled";
  std::vector<double> weights;

  void add_to(CLI::App* app, bool with_weights)
  {
    app->add_option("--iou", iou, "IoU threshold for clustering")->check(CLI::Range(0.0, 1.0))
    ->capture_default_str();
    app->add_option("--skip", skip, "Drop input detections scoring below this")
    ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app->add_option("--conf-type", conf, "Cluster score: average | rescaled")
    ->check(CLI::IsMember({"average", "rescaled"}))->capture_default_str();
    if (with_weights) {
      app->add_option("--weights", weights, "One positive weight per input file");
    }
  }

  FusionConfig config() const
  {
    FusionConfig c;
    c.iou_threshold = iou;
    c.score_threshold = skip;
    c.model_weights = weights;
    c.confidence_mode = conf == "average" ? ConfidenceMode::average : ConfidenceMode::average_rescaled;
    return c;
  }
};

void add_detector_flags(CLI::App* app, SyntheticDetectorConfig& c)
{
  app->add_option("--sigma", c.sigma, "Coordinate noise sigma in pixels")->capture_default_str();
  app->add_option("--drop", c.drop_probability, "Probability of missing a head")
  ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app->add_option("--fp-rate", c.fp_rate, "Mean false positives per image")->capture_default_str();
  app->add_option("--score-jitter", c.score_jitter, "Relative score noise in [0,1]")
  ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app->add_option("--fp-score-min", c.fp_score_min)->capture_default_str();
  app->add_option("--fp-score-max", c.fp_score_max)->capture_default_str();
}

// ---------------------------------------------------------------------------

struct StatsCmd
{
  std::string ann, images, out;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("stats", "Dataset statistics");
    s->add_option("--ann", ann, "Annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--images", images, "Image list adding unlabeled images")->check(CLI::ExistingFile);
    s->add_option("--out", out, "Write the full report here");
  }

  void run(Globals&)
  {
    guard_outputs({ann, images}, {out});
    const auto s = stats(load_annotations(ann, images));
    if (!out.empty()) {
      write_output(out, format_stats(s));
    }
    Summary sum;
    sum.add("images", s.image_count).add("boxes", s.box_count)
    .add("unlabeled_images", s.unlabeled_image_count).add("sources", s.per_source.size());
    sum.print(out == "-");
  }
};

struct CleanCmd
{
  std::string ann, out, report;
  double min_area = default_min_area;
  double max_area = default_max_area;
  bool keep_empty = false;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("clean", "Remove tiny and huge boxes");
    s->add_option("--ann", ann, "Annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "Cleaned annotation table")->required();
    s->add_option("--min-area", min_area, "Smallest kept box area (px^2)")->capture_default_str();
    s->add_option("--max-area", max_area, "Largest kept box area (px^2)")->capture_default_str();
    s->add_flag("--keep-empty", keep_empty, "Keep images left without boxes");
    s->add_option("--report", report, "Write the cleaning report here");
  }

  void run(Globals&)
  {
    guard_outputs({ann}, {out, report});
    const auto [cleaned, rep] = clean(load_annotations(ann), min_area, max_area, !keep_empty);
    write_output(out, serialize_annotations(cleaned));
    if (!report.empty()) {
      write_output(report, format_report(rep));
    }
    Summary sum;
    sum.add("removed_tiny", rep.removed_tiny).add("removed_huge", rep.removed_huge)
    .add("removed_unlabeled_images", rep.removed_unlabeled_images)
    .add("images", rep.images_after).add("boxes", rep.boxes_after);
    sum.print(out == "-" || report == "-");
  }
};

struct SplitCmd
{
  std::string ann, out;
  int k = 5;
  int bins = 3;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("split", "Stratified k-fold assignment");
    s->add_option("--ann", ann, "Annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "Fold table (image_id,fold)")->required();
    s->add_option("--k", k, "Number of folds")->capture_default_str();
    s->add_option("--bins", bins, "Box-density quantile bins")->capture_default_str();
  }

  void run(Globals& g)
  {
    guard_outputs({ann}, {out});
    const auto seed = resolve_seed(g);
    const auto d = load_annotations(ann);
    const auto fa = stratified_kfold(d, k, bins, seed);
    write_output(out, serialize_folds(fa));
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [id, f] : fa.assignment) {
      ++sizes[f];
    }
    Summary sum;
    sum.add("k", k).add("images", d.records.size()).add("seed", seed);
    for (int f = 0; f < k; ++f) {
      sum.add("fold" + std::to_string(f), sizes[f]);
    }
    sum.print(out == "-");
  }
};

struct SubsetsCmd
{
  std::string ann, out_dir;
  int n = 0;
  double fraction = 0.0;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("subsets", "Bagging subsets without replacement");
    s->add_option("--ann", ann, "Annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--n", n, "Number of subsets")->required();
    s->add_option("--fraction", fraction, "Fraction of images per subset")->required();
    s->add_option("--out-dir", out_dir, "Directory receiving subset_<i>.csv")->required();
  }

  void run(Globals& g)
  {
    const auto seed = resolve_seed(g);
    const auto subs = bagging_subsets(load_annotations(ann), n, fraction, seed);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      const auto path = (fs::path(out_dir) / ("subset_" + std::to_string(i) + ".csv")).string();
      guard_outputs({ann}, {path});
      write_output(path, serialize_annotations(subs[i]));
    }
    Summary sum;
    sum.add("subsets", subs.size()).add("images_per_subset", subs.front().records.size())
    .add("seed", seed);
    sum.print(false);
  }
};

struct AugmentCmd
{
  std::string ann, image_dir, out_dir, policy = "G2";
  int copies = 1;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("augment", "Apply a probabilistic augmentation policy");
    s->add_option("--ann", ann, "Annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--image-dir", image_dir, "Directory holding <image_id>.ppm")->required()
    ->check(CLI::ExistingDirectory);
    s->add_option("--out-dir", out_dir, "Receives augmented images and annotations.csv")->required();
    s->add_option("--policy", policy, "G1, G2 or a policy file")->capture_default_str();
    s->add_option("--copies", copies, "Augmented copies per image")->check(CLI::PositiveNumber)
    ->capture_default_str();
  }

  void run(Globals& g)
  {
    const auto seed = resolve_seed(g);
    const auto pol = load_policy(policy);
    const auto d = load_annotations(ann);
    if (fs::exists(out_dir) && fs::equivalent(out_dir, image_dir)) {
      throw UsageError("--out-dir must differ from --image-dir");
    }
    fs::create_directories(out_dir);

    const std::size_t jobs = d.records.size() * static_cast<std::size_t>(copies);
    std::vector<ImageRecord> out(jobs);
    std::vector<std::size_t> applied(jobs, 0);
    parallel_for(jobs, g.workers, [&](std::size_t j) {
        const auto& r = d.records[j / copies];
        const std::string id = r.image_id + "_aug" + std::to_string(j % copies);
        std::mt19937_64 rng(derive_seed(seed, id));
        Image img = read_ppm((fs::path(image_dir) / (r.image_id + ".ppm")).string());
        if (img.width() != r.width || img.height() != r.height) {
          throw std::runtime_error("image '" + r.image_id + "' does not match its annotated size");
        }
        const auto ops = sample(pol, rng);
        auto res = apply(ops, std::move(img), r.boxes, rng);
        write_ppm((fs::path(out_dir) / (id + ".ppm")).string(), res.image);
        out[j] = ImageRecord{id, res.image.width(), res.image.height(), r.source, std::move(res.boxes)};
        applied[j] = ops.size();
      });

    Dataset result{out};
    write_output((fs::path(out_dir) / "annotations.csv").string(), serialize_annotations(result));
    std::size_t ops_total = 0;
    for (auto a : applied) {
      ops_total += a;
    }
    Summary sum;
    sum.add("policy", pol.name).add("images", jobs).add("ops_applied", ops_total)
    .add("boxes_in", d.box_count() * copies).add("boxes_out", result.box_count()).add("seed", seed);
    sum.print(false);
  }
};

struct FuseCmd
{
  std::string method = "wbf", out = "-";
  std::vector<std::string> inputs;
  FusionFlags flags;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("fuse", "Fuse prediction files with NMS or WBF");
    s->add_option("--method", method, "nms | wbf")->check(CLI::IsMember({"nms", "wbf"}))
    ->capture_default_str();
    s->add_option("--inputs", inputs, "Prediction files")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "Fused predictions ('-' for stdout)")->capture_default_str();
    flags.add_to(s, true);
  }

  void run(Globals& g)
  {
    guard_outputs(inputs, {out});
    std::vector<PredictionMap> lists;
    std::set<std::string> ids;
    std::size_t n_in = 0;
    for (const auto& path : inputs) {
      lists.push_back(read_predictions(path));
      for (const auto& [id, dets] : lists.back()) {
        ids.insert(id);
        n_in += dets.size();
      }
    }
    const auto cfg = flags.config();
    if (method == "nms" && !cfg.model_weights.empty()) {
      throw UsageError("--weights applies to wbf only");
    }
    const std::vector<std::string> order(ids.begin(), ids.end());
    std::vector<std::vector<Detection>> fused(order.size());
    parallel_for(order.size(), g.workers, [&](std::size_t i) {
        std::vector<std::vector<Detection>> per_list;
        for (const auto& l : lists) {
          auto it = l.find(order[i]);
          per_list.push_back(it == l.end() ? std::vector<Detection>{} : it->second);
        }
        if (method == "wbf") {
          fused[i] = wbf(per_list, cfg);
        } else {
          std::vector<Detection> all;
          for (auto& pl : per_list) {
            for (auto& d : pl) {
              if (d.score >= cfg.score_threshold) {
                all.push_back(std::move(d));
              }
            }
          }
          fused[i] = nms(std::move(all), cfg.iou_threshold);
        }
      });
    PredictionMap result;
    std::size_t n_out = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      n_out += fused[i].size();
      result[order[i]] = std::move(fused[i]);
    }
    write_output(out, serialize_predictions(result));
    Summary sum;
    sum.add("method", method).add("inputs", inputs.size()).add("images", result.size())
    .add("detections_in", n_in).add("detections_out", n_out);
    sum.print(out == "-");
  }
};

struct EvalCmd
{
  std::string mode, pred, ann, report;
  std::vector<double> thresholds;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("eval", "mAP over IoU thresholds 0.50:0.05:0.75");
    s->add_option("--mode", mode, "ap (precision-recall area) | challenge (TP/(TP+FP+FN))")
    ->required()->check(CLI::IsMember({"ap", "challenge"}));
    s->add_option("--pred", pred, "Predictions file")->required()->check(CLI::ExistingFile);
    s->add_option("--ann", ann, "Ground-truth annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--thresholds", thresholds, "Override the IoU thresholds");
    s->add_option("--report", report, "Write per-threshold values here");
  }

  void run(Globals&)
  {
    guard_outputs({pred, ann}, {report});
    const auto gt = load_annotations(ann);
    const auto preds = read_predictions(pred);
    for (const auto& [id, dets] : preds) {
      if (gt.find(id) == nullptr) {
        throw std::runtime_error("predictions mention image '" + id + "' absent from " + ann);
      }
    }
    std::vector<ImageEval> images;
    for (const auto& r : gt.records) {
      auto it = preds.find(r.image_id);
      images.push_back({it == preds.end() ? std::vector<Detection>{} : it->second, r.boxes});
    }
    EvalConfig cfg;
    cfg.mode = mode == "ap" ? MetricMode::ap_curve : MetricMode::challenge;
    if (!thresholds.empty()) {
      cfg.iou_thresholds = thresholds;
    }
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto rep = evaluate(images, cfg);
    Summary sum;
    sum.add("mode", mode).add("map", rep.value).add("images", rep.image_count)
    .add("detections", rep.detection_count).add("ground_truth", rep.ground_truth_count);
    std::ostringstream full;
    full << "mode=" << mode << '\n' << "map=" << detail::format_real(rep.value) << '\n';
    for (std::size_t i = 0; i < rep.thresholds.size(); ++i) {
      char key[32];
      std::snprintf(key, sizeof(key), "map@%.2f", rep.thresholds[i]);
      sum.add(key, rep.per_threshold[i]);
      full << key << '=' << detail::format_real(rep.per_threshold[i]) << '\n';
    }
    if (!report.empty()) {
      write_output(report, full.str());
    }
    sum.print(report == "-");
  }
};

struct AdapterFlags
{
  std::string workdir;
  double timeout = 600.0;

  void add_to(CLI::App* s)
  {
    s->add_option("--workdir", workdir, "Directory for manifests, logs and outputs")->required();
    s->add_option("--timeout", timeout, "Seconds per adapter invocation")->capture_default_str();
  }
};

struct TtaCmd
{
  std::string images, ann, predict_cmd, view_dir, out = "-";
  AdapterFlags adapter;
  FusionFlags flags;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("tta", "Predict the 8 orientation views and fuse them");
    s->add_option("--images", images, "Image list")->check(CLI::ExistingFile);
    s->add_option("--ann", ann, "Annotation table used as the image list")->check(CLI::ExistingFile);
    s->add_option("--predict-cmd", predict_cmd, "Predict command template")->required();
    s->add_option("--view-dir", view_dir, "Where view images are written (default <workdir>/views)");
    s->add_option("--out", out, "Fused predictions ('-' for stdout)")->capture_default_str();
    adapter.add_to(s);
    flags.add_to(s, false);
  }

  void run(Globals& g)
  {
    guard_outputs({images, ann}, {out});
    const auto requests = load_request_images(images, ann);
    ProcessBackend backend({"", predict_cmd, adapter.workdir, adapter.timeout});
    const fs::path views = view_dir.empty() ? fs::path(adapter.workdir) / "views" : fs::path(view_dir);
    PredictionMap result;
    std::size_t n = 0;
    // The adapter serves one invocation at a time, so images go in sequence.
    for (const auto& r : requests) {
      log(g, "tta " + r.image_id);
      auto dets = tta_predict(backend, r, flags.config(), views);
      n += dets.size();
      result[r.image_id] = std::move(dets);
    }
    write_output(out, serialize_predictions(result));
    Summary sum;
    sum.add("images", requests.size()).add("views", tta_views().size()).add("detections", n);
    sum.print(out == "-");
  }
};

struct PseudoCmd
{
  std::string train, test, train_cmd, predict_cmd, history_dir, out = "-";
  int rounds = 1;
  double threshold = 0.5;
  int epochs = 1;
  AdapterFlags adapter;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("pseudo", "Pseudo-labeling rounds through a detector adapter");
    s->add_option("--train", train, "Training annotation table")->required()->check(CLI::ExistingFile);
    s->add_option("--test", test, "Test image list")->required()->check(CLI::ExistingFile);
    s->add_option("--train-cmd", train_cmd, "Train command template")->required();
    s->add_option("--predict-cmd", predict_cmd, "Predict command template")->required();
    s->add_option("--rounds", rounds, "Number of rounds")->check(CLI::PositiveNumber)
    ->capture_default_str();
    s->add_option("--threshold", threshold, "Minimum score of a pseudo label")
    ->check(CLI::Range(0.0, 1.0))->capture_default_str();
    s->add_option("--epochs", epochs, "Epochs hint passed to the trainer")->capture_default_str();
    s->add_option("--history-dir", history_dir, "Write round_<r>.csv training sets here");
    s->add_option("--out", out, "Final predictions ('-' for stdout)")->capture_default_str();
    adapter.add_to(s);
  }

  void run(Globals&)
  {
    guard_outputs({train, test}, {out});
    ProcessBackend backend({train_cmd, predict_cmd, adapter.workdir, adapter.timeout});
    PseudoLabelConfig cfg;
    cfg.rounds = rounds;
    cfg.confidence_threshold = threshold;
    cfg.epochs_hint = epochs;
    cfg.history_dir = history_dir;
    const auto base = load_annotations(train);
    const auto res = pseudo_label_rounds(base, parse_image_list(read_text_file(test)), backend, cfg);
    write_output(out, serialize_predictions(res.final_predictions));
    const auto& last = res.history.back();
    Summary sum;
    sum.add("rounds", rounds).add("train_calls", rounds).add("predict_calls", rounds + 1)
    .add("train_images", last.records.size())
    .add("pseudo_images", last.records.size() - base.records.size())
    .add("pseudo_boxes", last.box_count() - base.box_count());
    sum.print(out == "-");
  }
};

struct SynthCmd
{
  CLI::App* scenes_app = nullptr;
  CLI::App* detect_app = nullptr;
  CLI::App* adapter_app = nullptr;

  // scenes
  int n = 0;
  SceneConfig scene;
  std::string prefix = "scene";
  std::string scenes_out, list_out, raster_dir;
  // detect / adapter
  std::string ann, detect_out = "-", manifest;
  SyntheticDetectorConfig det;

  void add(CLI::App& app)
  {
    auto* s = app.add_subcommand("synth", "Synthetic scenes and a noisy oracle detector");
    s->require_subcommand(1);

    scenes_app = s->add_subcommand("scenes", "Generate annotated synthetic scenes");
    scenes_app->add_option("--n", n, "Number of scenes")->required()->check(CLI::NonNegativeNumber);
    scenes_app->add_option("--width", scene.width)->capture_default_str();
    scenes_app->add_option("--height", scene.height)->capture_default_str();
    scenes_app->add_option("--min-heads", scene.min_heads)->capture_default_str();
    scenes_app->add_option("--max-heads", scene.max_heads)->capture_default_str();
    scenes_app->add_option("--overlap", scene.overlap, "Largest pairwise IoU between heads")
    ->capture_default_str();
    scenes_app->add_option("--min-size", scene.min_size)->capture_default_str();
    scenes_app->add_option("--max-size", scene.max_size)->capture_default_str();
    scenes_app->add_option("--source", scene.source)->capture_default_str();
    scenes_app->add_option("--prefix", prefix, "Image id prefix")->capture_default_str();
    scenes_app->add_option("--out", scenes_out, "Annotation table")->required();
    scenes_app->add_option("--list", list_out, "Also write an image list here");
    scenes_app->add_option("--raster-dir", raster_dir, "Also render <image_id>.ppm here");

    detect_app = s->add_subcommand("detect", "Noisy detections from ground truth");
    detect_app->add_option("--ann", ann, "Ground-truth table")->required()->check(CLI::ExistingFile);
    detect_app->add_option("--out", detect_out, "Predictions ('-' for stdout)")->capture_default_str();
    add_detector_flags(detect_app, det);

    adapter_app = s->add_subcommand("adapter",
        "Answer a request manifest from ground truth (usable as --predict-cmd/--train-cmd)");
    adapter_app->add_option("--ann", ann, "Ground-truth table")->required()->check(CLI::ExistingFile);
    adapter_app->add_option("manifest", manifest, "Request manifest")->required()
    ->check(CLI::ExistingFile);
    add_detector_flags(adapter_app, det);
  }

  void run(Globals& g)
  {
    if (scenes_app->parsed()) {
      run_scenes(g);
    } else if (detect_app->parsed()) {
      run_detect(g);
    } else {
      run_adapter(g);
    }
  }

  void run_scenes(Globals& g)
  {
    const auto seed = resolve_seed(g);
    scene.raster = !raster_dir.empty();
    if (scene.raster) {
      fs::create_directories(raster_dir);
    }
    std::vector<ImageRecord> records(n);
    parallel_for(records.size(), g.workers, [&](std::size_t i) {
        const std::string id = prefix + std::to_string(i);
        std::mt19937_64 rng(derive_seed(seed, id));
        auto sc = synth_scene(scene, id, rng);
        if (sc.image) {
          sc.record.path = (fs::path(raster_dir) / (id + ".ppm")).string();
          write_ppm(sc.record.path, *sc.image);
        }
        records[i] = std::move(sc.record);
      });
    Dataset d{records};
    write_output(scenes_out, serialize_annotations(d));
    if (!list_out.empty()) {
      write_output(list_out, serialize_image_list(records));
    }
    Summary sum;
    sum.add("scenes", records.size()).add("boxes", d.box_count()).add("seed", seed);
    sum.print(scenes_out == "-" || list_out == "-");
  }

  void run_detect(Globals& g)
  {
    guard_outputs({ann}, {detect_out});
    det.seed = resolve_seed(g);
    const auto gt = load_annotations(ann);
    std::vector<std::vector<Detection>> dets(gt.records.size());
    parallel_for(gt.records.size(), g.workers, [&](std::size_t i) {
        dets[i] = synth_detect(gt.records[i], det);
      });
    PredictionMap preds;
    std::size_t n_det = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      n_det += dets[i].size();
      preds[gt.records[i].image_id] = std::move(dets[i]);
    }
    write_output(detect_out, serialize_predictions(preds));
    Summary sum;
    sum.add("images", preds.size()).add("detections", n_det).add("seed", det.seed);
    sum.print(detect_out == "-");
  }

  void run_adapter(Globals& g)
  {
    det.seed = resolve_seed(g);
    const auto m = parse_manifest(read_text_file(manifest));
    Summary sum;
    sum.add("mode", m.mode == RequestMode::train ? "train" : "predict").add("images", m.images.size());
    if (m.mode == RequestMode::predict) {
      SyntheticBackend backend(load_annotations(ann), det);
      write_output(m.output, serialize_predictions(backend.predict(m.images)));
    }
    sum.add("seed", det.seed);
    sum.print(false);
  }
};

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"wheatdet: wheat-head detection pipeline tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed,
      "Seed for randomized steps (generated and printed when absent)");
  app.add_option("--workers", g.workers, "Worker threads for per-image work")
  ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  StatsCmd stats_cmd;
  CleanCmd clean_cmd;
  SplitCmd split_cmd;
  SubsetsCmd subsets_cmd;
  AugmentCmd augment_cmd;
  FuseCmd fuse_cmd;
  EvalCmd eval_cmd;
  TtaCmd tta_cmd;
  PseudoCmd pseudo_cmd;
  SynthCmd synth_cmd;
  stats_cmd.add(app);
  clean_cmd.add(app);
  split_cmd.add(app);
  subsets_cmd.add(app);
  augment_cmd.add(app);
  fuse_cmd.add(app);
  eval_cmd.add(app);
  tta_cmd.add(app);
  pseudo_cmd.add(app);
  synth_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "stats") {stats_cmd.run(g);}
    else if (name == "clean") {clean_cmd.run(g);}
    else if (name == "split") {split_cmd.run(g);}
    else if (name == "subsets") {subsets_cmd.run(g);}
    else if (name == "augment") {augment_cmd.run(g);}
    else if (name == "fuse") {fuse_cmd.run(g);}
    else if (name == "eval") {eval_cmd.run(g);}
    else if (name == "tta") {tta_cmd.run(g);}
    else if (name == "pseudo") {pseudo_cmd.run(g);}
    else if (name == "synth") {synth_cmd.run(g);}
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const AdapterError& e) {
    std::cerr << "adapter error: " << e.what() << '\n';
    if (!e.diagnostics().empty()) {
      std::cerr << "--- adapter output ---\n" << e.diagnostics() << '\n';
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
