#include "harborscan/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "harborscan/analytics.hpp"
#include "harborscan/backend.hpp"
#include "harborscan/dataset.hpp"
#include "harborscan/evaluation.hpp"
#include "harborscan/image.hpp"
#include "harborscan/service.hpp"

namespace harborscan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

AnchorMetric parse_metric(const std::string& s) {
  if (s == "iou") return AnchorMetric::Iou;
  if (s == "euclidean") return AnchorMetric::Euclidean;
  throw UsageError("unknown anchor metric '" + s + "' (iou|euclidean)");
}

}  // namespace

RunConfig load_run_config(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw UsageError("config file not found: " + p.string());
  json j;
  try {
    j = json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw UsageError("config " + p.string() + ": " + e.what());
  }
  RunConfig c;
  const fs::path base = p.parent_path();
  auto rel = [&base](const std::string& s) { return fs::path(s).is_absolute() ? fs::path(s) : base / s; };
  try {
    if (j.contains("data")) c.data_root = rel(j.at("data").get<std::string>());
    if (j.contains("classes")) c.classes_file = rel(j.at("classes").get<std::string>());
    if (j.contains("out")) c.out_dir = rel(j.at("out").get<std::string>());
    if (j.contains("seed")) {
      const auto seed = j.at("seed").get<std::uint64_t>();
      c.split_seed = c.cluster.seed = c.augment.seed = seed;
    }
    if (j.contains("iou")) c.thresholds = {j.at("iou").get<double>()};
    take(j, "k", c.cluster.k);
    take(j, "thresholds", c.thresholds);
    if (j.contains("decode")) {
      const auto& d = j.at("decode");
      take(d, "confidence", c.decode.confidence_threshold);
      take(d, "nms_iou", c.decode.nms_iou_threshold);
    }
    if (j.contains("head")) {
      const auto& h = j.at("head");
      take(h, "input_size", c.head.input_size);
      take(h, "strides", c.head.strides);
      take(h, "boxes", c.head.boxes_per_cell);
      take(h, "classes", c.head.num_classes);
    }
    if (j.contains("tracker")) {
      const auto& t = j.at("tracker");
      take(t, "pyramid_levels", c.tracker.pyramid_levels);
      take(t, "window", c.tracker.window);
      take(t, "max_iterations", c.tracker.max_iterations);
      take(t, "epsilon", c.tracker.epsilon);
      take(t, "detect_every_n", c.tracker.detect_every_n);
      take(t, "reassoc_iou", c.tracker.reassoc_iou);
      take(t, "min_alive_points", c.tracker.min_alive_points);
      take(t, "max_points", c.tracker.max_points);
      take(t, "min_eigen", c.tracker.min_eigen);
    }
    if (j.contains("anchors")) {
      const auto& a = j.at("anchors");
      take(a, "k", c.cluster.k);
      take(a, "max_iter", c.cluster.max_iter);
      take(a, "seed", c.cluster.seed);
      if (a.contains("metric")) c.cluster.metric = parse_metric(a.at("metric").get<std::string>());
    }
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      take(a, "scale_min", c.augment.scale_min);
      take(a, "scale_max", c.augment.scale_max);
      take(a, "flip_probability", c.augment.flip_probability);
      take(a, "seed", c.augment.seed);
      take(a, "pad_value", c.augment.pad_value);
      take(a, "min_visibility", c.augment.min_visibility);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      take(s, "seed", c.split_seed);
      take(s, "fraction", c.split_fraction);
    }
  } catch (const json::exception& e) {
    throw UsageError("config " + p.string() + ": " + e.what());
  }
  if (!c.data_root.empty() && !fs::is_directory(c.data_root)) {
    throw UsageError("dataset root not found: " + c.data_root.string());
  }
  if (!c.classes_file.empty() && !fs::is_regular_file(c.classes_file)) {
    throw UsageError("classes file not found: " + c.classes_file.string());
  }
  return c;
}

std::optional<fs::path> default_classes_file(const fs::path& root) {
  for (const char* name : {"classes.names", "obj.names", "classes.txt"}) {
    if (fs::is_regular_file(root / name)) return root / name;
  }
  return std::nullopt;
}

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string classes;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> iou;
  std::optional<int> k;
  std::optional<int> port;
};

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;

  DatasetIndex scan() const {
    if (cfg.data_root.empty()) throw UsageError("no dataset root (use --data or HARBORSCAN_DATA)");
    if (!fs::is_directory(cfg.data_root)) throw UsageError("dataset root not found: " + cfg.data_root.string());
    fs::path cls = cfg.classes_file;
    if (cls.empty()) {
      const auto found = default_classes_file(cfg.data_root);
      if (!found) throw UsageError("no classes file (use --classes)");
      cls = *found;
    }
    if (!fs::is_regular_file(cls)) throw UsageError("classes file not found: " + cls.string());
    return scan_dataset(cfg.data_root, ClassList::load(cls));
  }

  fs::path out_path(const std::string& name) const {
    fs::create_directories(cfg.out_dir);
    return cfg.out_dir / name;
  }

  void write(const std::string& name, const std::string& content) const {
    write_file_atomic(out_path(name), content);
    out << "wrote " << (cfg.out_dir / name).string() << "\n";
  }
};

std::vector<std::string> read_list(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(read_text_file(p));
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string issues_json(const ValidationReport& rep) {
  ordered_json j;
  j["ok"] = rep.empty();
  auto& counts = j["counts"] = ordered_json::object();
  for (const auto& [k, n] : rep.counts) counts[to_string(k)] = n;
  auto& arr = j["issues"] = ordered_json::array();
  for (const auto& is : rep.issues) {
    ordered_json o;
    o["path"] = is.path;
    o["line"] = is.line ? ordered_json(*is.line) : ordered_json(nullptr);
    o["kind"] = to_string(is.kind);
    o["message"] = is.message;
    arr.push_back(std::move(o));
  }
  j["unannotated"] = rep.unannotated;
  return j.dump(2) + "\n";
}

int cmd_validate(const Context& ctx) {
  const DatasetIndex idx = ctx.scan();
  const ValidationReport rep = validate_dataset(idx);
  const std::string text = issues_json(rep);
  if (!ctx.cfg.out_dir.empty() && ctx.cfg.out_dir != ".") {
    ctx.write("validation.json", text);
  } else {
    ctx.out << text;
  }
  for (const auto& is : rep.issues) {
    ctx.err << is.path << (is.line ? ":" + std::to_string(*is.line) : std::string()) << ": " << to_string(is.kind)
            << ": " << is.message << "\n";
  }
  return rep.empty() ? kExitOk : kExitValidation;
}

int cmd_stats(const Context& ctx, std::optional<int> class_filter) {
  const DatasetIndex idx = ctx.scan();
  const auto labels = load_labels(idx);
  if (class_filter && !idx.classes.contains(*class_filter)) throw UsageError("class filter out of range");
  ctx.write("class_histogram.json", histogram_json(class_counts(labels, idx.classes.size()), idx.classes));
  ctx.write("density_wh.csv", density_wh(labels, 50, 50, class_filter).to_csv());
  ctx.write("density_ar_area.csv", density_ar_area(labels, 80, 50, 8.0, class_filter).to_csv());
  return kExitOk;
}

std::vector<Shape> training_shapes(const Context& ctx, const std::string& train_list) {
  const DatasetIndex idx = ctx.scan();
  auto labels = load_labels(idx);
  if (!train_list.empty()) {
    const auto keep_list = read_list(train_list);
    const std::set<std::string> keep(keep_list.begin(), keep_list.end());
    std::erase_if(labels, [&keep](const LabeledImage& l) { return !keep.count(l.id); });
  }
  std::vector<Shape> shapes;
  for (const auto& l : labels)
    for (const auto& r : l.records) shapes.push_back(Shape{r.box.w, r.box.h});
  return shapes;
}

int cmd_anchors(const Context& ctx, const std::string& train_list) {
  const auto shapes = training_shapes(ctx, train_list);
  const AnchorSet set = kmeans_anchors(shapes, ctx.cfg.cluster);
  ctx.write("anchors.txt", anchors_text(set));
  ctx.write("anchors.json", anchors_json(set, ctx.cfg.cluster));
  return kExitOk;
}

int cmd_split(const Context& ctx) {
  const DatasetIndex idx = ctx.scan();
  const auto labels = load_labels(idx);
  const SplitResult split = stratified_split(labels, idx.classes.size(), ctx.cfg.split_fraction, ctx.cfg.split_seed);
  std::string train, test;
  for (const auto& id : split.train) train += id + "\n";
  for (const auto& id : split.test) test += id + "\n";
  ctx.write("train.txt", train);
  ctx.write("test.txt", test);

  ordered_json j;
  j["seed"] = ctx.cfg.split_seed;
  j["test_fraction"] = ctx.cfg.split_fraction;
  j["train_images"] = split.train.size();
  j["test_images"] = split.test.size();
  const auto shares = test_shares(split);
  auto& per = j["classes"] = ordered_json::array();
  for (std::size_t c = 0; c < idx.classes.size(); ++c) {
    per.push_back({{"class_id", c},
                   {"name", idx.classes.names()[c]},
                   {"train_objects", split.train_objects[c]},
                   {"test_objects", split.test_objects[c]},
                   {"test_share", shares[c] ? ordered_json(*shares[c]) : ordered_json(nullptr)}});
  }
  ctx.write("split.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_augment(const Context& ctx, int copies) {
  if (copies < 1) throw UsageError("--copies must be >= 1");
  ctx.cfg.augment.validate();
  const DatasetIndex idx = ctx.scan();
  std::string log;
  std::uint64_t draw = 0;
  for (const auto& e : idx.entries) {
    Sample sample{load_image(e.image), {}};
    if (e.annotation) sample.records = parse_annotation(read_text_file(*e.annotation), idx.classes);
    for (int c = 0; c < copies; ++c, ++draw) {
      const AugmentedSample a = augment(sample, ctx.cfg.augment, draw);
      fs::path rel(e.id);
      if (copies > 1) rel.replace_filename(rel.stem().string() + "_aug" + std::to_string(c) + rel.extension().string());
      const fs::path img_out = ctx.out_path(rel.string());
      fs::create_directories(img_out.parent_path());
      save_image(img_out, a.image);
      fs::path txt_out = img_out;
      txt_out.replace_extension(".txt");
      write_file_atomic(txt_out, write_annotation(a.records));
      log += json{{"source", e.id},
                  {"output", rel.generic_string()},
                  {"draw", draw},
                  {"scale", a.transform.scale},
                  {"flipped", a.transform.flipped},
                  {"records", a.records.size()}}
                 .dump() +
             "\n";
    }
  }
  ctx.write("augment_log.jsonl", log);
  return kExitOk;
}

std::vector<ImageEvalInput> eval_inputs(const DatasetIndex& idx, const DetectionsByImage& dets, std::ostream& err) {
  std::vector<ImageEvalInput> out;
  std::set<std::string> seen;
  for (const auto& l : load_labels(idx)) {
    if (!l.annotated) continue;
    ImageEvalInput in{l.id, l.records, {}};
    if (auto it = dets.find(l.id); it != dets.end()) in.predictions = it->second;
    seen.insert(l.id);
    out.push_back(std::move(in));
  }
  for (const auto& [id, list] : dets) {
    if (!seen.count(id)) err << "warning: detections for " << id << " have no ground truth; ignored\n";
  }
  return out;
}

int cmd_eval(const Context& ctx, const std::string& detections, const std::vector<int>& subset) {
  if (detections.empty()) throw UsageError("eval needs --detections");
  const DatasetIndex idx = ctx.scan();
  const auto inputs = eval_inputs(idx, load_detections(detections), ctx.err);
  const std::vector<double> thr = ctx.cfg.thresholds.empty() ? default_sweep_thresholds() : ctx.cfg.thresholds;
  for (double t : thr) {
    if (!(t > 0.0 && t <= 1.0)) throw UsageError("IoU threshold outside (0, 1]");
  }
  const EvalReport rep = iou_sweep(inputs, thr, idx.classes.size(), subset);
  ctx.write("eval.json", report_json(rep, idx.classes));
  ctx.write("eval.csv", report_csv(rep, idx.classes));
  for (const auto& tr : rep.thresholds) {
    char line[64];
    if (tr.map) {
      std::snprintf(line, sizeof(line), "IoU %.2f  mAP %.6f\n", tr.iou_threshold, *tr.map);
    } else {
      std::snprintf(line, sizeof(line), "IoU %.2f  mAP undefined\n", tr.iou_threshold);
    }
    ctx.out << line;
  }
  return kExitOk;
}

AnchorSet load_anchor_set(const std::string& path) {
  if (path.empty()) throw UsageError("--anchors is required with --tensors");
  AnchorSet set;
  set.anchors = parse_anchors_text(read_text_file(path));
  sort_anchors(set.anchors);
  if (set.anchors.size() != 9) throw UsageError("anchor file must hold 9 anchors");
  set.scale_assignment = assign_scales(set.anchors);
  return set;
}

int cmd_decode(const Context& ctx, const std::string& tensors, const std::string& anchors) {
  if (tensors.empty()) throw UsageError("decode needs --tensors");
  const DatasetIndex idx = ctx.scan();
  HeadConfig head = ctx.cfg.head;
  head.num_classes = static_cast<int>(idx.classes.size());
  TensorBackend backend(tensors, load_anchor_set(anchors), head, ctx.cfg.decode);
  DetectionsByImage all;
  for (const auto& e : idx.entries) {
    if (!fs::is_regular_file(backend.dump_path(e.id))) {
      ctx.err << "warning: no head dump for " << e.id << "\n";
      continue;
    }
    all[e.id] = backend.detect(e.id);
  }
  ctx.write("detections.jsonl", format_detections(all));
  return kExitOk;
}

int cmd_track(const Context& ctx, const std::string& frames, const std::string& detections, const std::string& tensors,
              const std::string& anchors) {
  if (frames.empty()) throw UsageError("track needs --frames");
  if (detections.empty() == tensors.empty()) throw UsageError("track needs exactly one of --detections, --tensors");
  const auto refs = list_frames(frames);
  std::unique_ptr<DetectorBackend> backend;
  if (!detections.empty()) {
    backend = std::make_unique<ReplayBackend>(ReplayBackend::from_file(detections));
  } else {
    backend = std::make_unique<TensorBackend>(tensors, load_anchor_set(anchors), ctx.cfg.head, ctx.cfg.decode);
  }
  TrackingPipeline pipeline(ctx.cfg.tracker, *backend);
  std::string lines;
  for (const auto& ref : refs) {
    const GrayFrame g = to_gray(load_image(ref.path), ref.index);
    for (const auto& o : pipeline.process(g, ref.image_id)) lines += format_tracked(o) + "\n";
  }
  ctx.write("tracks.jsonl", lines);
  return kExitOk;
}

ReviewService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const Context& ctx, int port, const std::string& detections, const std::string& ui_dir) {
  const DatasetIndex idx = ctx.scan();
  DetectionsByImage props;
  if (!detections.empty()) props = load_detections(detections);
  ServiceOptions opts;
  if (!ui_dir.empty()) {
    if (!fs::is_directory(ui_dir)) throw UsageError("UI directory not found: " + ui_dir);
    opts.ui_dir = ui_dir;
  }
  ReviewService svc(idx, std::move(props), opts);
  const int bound = svc.bind(port);
  ctx.out << "serving " << idx.entries.size() << " images on http://" << opts.host << ":" << bound << "\n"
          << std::flush;
  g_service = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc.listen();
  g_service = nullptr;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Maritime detection dataset and pipeline toolkit", "harborscan"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON config file; flags override it");
  app.add_option("--data", f.data, "Dataset root (default: $HARBORSCAN_DATA)");
  app.add_option("--classes", f.classes, "Class names file, one per line");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Random seed");

  auto* validate = app.add_subcommand("validate", "Check annotations against the YOLO format");
  auto* stats = app.add_subcommand("stats", "Class histogram and box density grids");
  std::optional<int> stats_class;
  stats->add_option("--class", stats_class, "Restrict density grids to one class id");

  auto* anchors = app.add_subcommand("anchors", "k-means anchor boxes");
  std::string train_list, metric;
  std::optional<int> max_iter;
  anchors->add_option("--k", f.k, "Number of anchors");
  anchors->add_option("--train", train_list, "Restrict to the image ids listed in this file");
  anchors->add_option("--metric", metric, "iou or euclidean");
  anchors->add_option("--max-iter", max_iter, "Iteration cap");

  auto* split = app.add_subcommand("split", "Stratified train/test split");
  std::optional<double> fraction;
  split->add_option("--fraction", fraction, "Test fraction");

  auto* aug = app.add_subcommand("augment", "Scale and flip augmentation");
  int copies = 1;
  std::optional<double> scale_min, scale_max, flip_p;
  aug->add_option("--copies", copies, "Augmented copies per image");
  aug->add_option("--scale-min", scale_min);
  aug->add_option("--scale-max", scale_max);
  aug->add_option("--flip-probability", flip_p);

  auto* eval = app.add_subcommand("eval", "AP / mAP over IoU thresholds");
  std::string detections;
  std::vector<int> subset;
  eval->add_option("--detections", detections, "Detections JSON-lines file");
  eval->add_option("--iou", f.iou, "Single IoU threshold (default: 0.50:0.05:0.95 sweep)");
  eval->add_option("--eval-classes", subset, "Class ids entering mAP")->delimiter(',');

  auto* decode = app.add_subcommand("decode", "Decode head dumps into a detections file");
  std::string tensors, anchor_file;
  std::optional<double> conf, nms_iou;
  decode->add_option("--tensors", tensors, "Directory of .head dumps");
  decode->add_option("--anchors", anchor_file, "anchors.txt");
  decode->add_option("--conf", conf, "Confidence threshold");
  decode->add_option("--nms-iou", nms_iou, "NMS IoU threshold");

  auto* track = app.add_subcommand("track", "Detect every n frames, track in between");
  std::string frames;
  std::optional<int> every;
  track->add_option("--frames", frames, "Frame directory or JSON manifest");
  track->add_option("--detections", detections, "Replay detections file");
  track->add_option("--tensors", tensors, "Directory of .head dumps");
  track->add_option("--anchors", anchor_file, "anchors.txt");
  track->add_option("--every", every, "Detector cadence");
  track->add_option("--conf", conf);
  track->add_option("--nms-iou", nms_iou);

  auto* serve = app.add_subcommand("serve", "Annotation review service");
  std::string ui_dir;
  serve->add_option("--port", f.port, "Listen port (0 picks one)");
  serve->add_option("--detections", detections, "Detections used as proposals");
  serve->add_option("--ui-dir", ui_dir, "Static UI directory served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (!f.data.empty()) {
      cfg.data_root = f.data;
    } else if (cfg.data_root.empty()) {
      if (const char* env = std::getenv("HARBORSCAN_DATA"); env && *env) cfg.data_root = env;
    }
    if (!f.classes.empty()) cfg.classes_file = f.classes;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.seed) cfg.split_seed = cfg.cluster.seed = cfg.augment.seed = *f.seed;
    if (f.iou) cfg.thresholds = {*f.iou};
    if (f.k) cfg.cluster.k = *f.k;
    if (!metric.empty()) cfg.cluster.metric = parse_metric(metric);
    if (max_iter) cfg.cluster.max_iter = *max_iter;
    if (fraction) cfg.split_fraction = *fraction;
    if (scale_min) cfg.augment.scale_min = *scale_min;
    if (scale_max) cfg.augment.scale_max = *scale_max;
    if (flip_p) cfg.augment.flip_probability = *flip_p;
    if (conf) cfg.decode.confidence_threshold = *conf;
    if (nms_iou) cfg.decode.nms_iou_threshold = *nms_iou;
    if (every) cfg.tracker.detect_every_n = *every;
    try {
      cfg.decode.validate();
      cfg.tracker.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (!(cfg.split_fraction >= 0.0 && cfg.split_fraction <= 1.0)) throw UsageError("--fraction outside [0, 1]");

    const Context ctx{cfg, out, err};
    if (*validate) return cmd_validate(ctx);
    if (*stats) return cmd_stats(ctx, stats_class);
    if (*anchors) return cmd_anchors(ctx, train_list);
    if (*split) return cmd_split(ctx);
    if (*aug) return cmd_augment(ctx, copies);
    if (*eval) return cmd_eval(ctx, detections, subset);
    if (*decode) return cmd_decode(ctx, tensors, anchor_file);
    if (*track) return cmd_track(ctx, frames, detections, tensors, anchor_file);
    if (*serve) return cmd_serve(ctx, f.port.value_or(8080), detections, ui_dir);
  } catch (const UsageError& e) {
    err << "harborscan: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "harborscan: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace harborscan
