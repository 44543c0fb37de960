#include "commands.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "aerovision/annotations.hpp"
#include "aerovision/augment.hpp"
#include "aerovision/config.hpp"
#include "aerovision/error.hpp"
#include "aerovision/metrics.hpp"
#include "aerovision/pipeline.hpp"
#include "aerovision/postprocess.hpp"
#include "aerovision/training.hpp"

namespace aerovision::cli {

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

// JSONL with 1-based line numbers in diagnostics; blank lines are skipped.
std::vector<std::pair<std::size_t, json>> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<std::size_t, json>> rows;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.emplace_back(n, json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
    if (!rows.back().second.is_object()) {
      throw Error(ErrorCode::SchemaViolation, path.string() + ":" + std::to_string(n) + ": expected an object");
    }
  }
  return rows;
}

std::string where(const std::filesystem::path& path, std::size_t line, const std::string& sample_id) {
  return path.string() + ":" + std::to_string(line) + " (sample '" + sample_id + "')";
}

BoundingBox box_from(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::SchemaViolation, ctx + ": box must be [x_min,y_min,x_max,y_max]");
  BoundingBox b;
  try {
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaViolation, ctx + ": box entries must be numbers");
  }
  if (!b.is_valid()) throw Error(ErrorCode::SchemaViolation, ctx + ": invalid box");
  return b;
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw Error(ErrorCode::SchemaViolation, ctx + ": missing '" + key + "'");
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaViolation, ctx + ": bad '" + key + "'");
  }
}

// Prediction rows keyed by sample; an id missing from the manifest is an input error.
std::map<std::string, std::pair<std::size_t, json>> predictions_by_sample(const EvalOptions& opts,
                                                                          const DatasetIndex& index) {
  std::map<std::string, std::pair<std::size_t, json>> out;
  for (auto& [line, row] : read_jsonl(opts.predictions)) {
    const auto id = get_field<std::string>(row, "sample_id", opts.predictions.string() + ":" + std::to_string(line));
    if (!index.find(id)) {
      throw Error(ErrorCode::SchemaViolation, where(opts.predictions, line, id) + ": not in manifest");
    }
    if (!out.emplace(id, std::make_pair(line, std::move(row))).second) {
      throw Error(ErrorCode::DuplicateSampleId, where(opts.predictions, line, id) + ": predicted twice");
    }
  }
  return out;
}

void check_manifest(const DatasetIndex& index) {
  const auto issues = validate(index);
  if (issues.empty()) return;
  for (const auto& issue : issues) {
    std::cerr << "manifest: sample '" << issue.sample_id << "': " << to_string(issue.kind) << ": " << issue.detail
              << '\n';
  }
  throw Error(ErrorCode::SchemaViolation, std::to_string(issues.size()) + " manifest issue(s), first in sample '" +
                                              issues.front().sample_id + "'");
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << v * 100.0 << " %";
  return s.str();
}

json per_class_json(const std::vector<std::string>& vocab, const std::vector<double>& values) {
  json j = json::object();
  for (std::size_t c = 0; c < values.size(); ++c) {
    const std::string name = c < vocab.size() ? vocab[c] : std::to_string(c);
    j[name] = values[c] < 0 ? json(nullptr) : json(values[c]);
  }
  return j;
}

json eval_detection(const EvalOptions& opts, const DatasetIndex& index) {
  const auto preds = predictions_by_sample(opts, index);
  const std::size_t classes = index.vocabulary.size();
  // Matching is per image; ranking for the PR curve is over the whole dataset.
  std::vector<std::vector<double>> scores(classes);
  std::vector<std::vector<bool>> hits(classes);
  std::vector<std::size_t> truths(classes, 0);
  for (const auto& sample : index.samples) {
    if (sample.kind != AnnotationKind::Detection) continue;
    std::vector<std::vector<ScoredBox>> p(classes);
    std::vector<std::vector<BoundingBox>> t(classes);
    for (const auto& lb : sample.boxes) t[lb.class_id].push_back(lb.box);
    if (auto it = preds.find(sample.id); it != preds.end()) {
      const auto& [line, row] = it->second;
      const auto ctx = where(opts.predictions, line, sample.id);
      const auto dets = get_field<json>(row, "detections", ctx);
      if (!dets.is_array()) throw Error(ErrorCode::SchemaViolation, ctx + ": 'detections' must be an array");
      for (const auto& d : dets) {
        const auto cls = get_field<std::size_t>(d, "class_id", ctx);
        if (cls >= classes) throw Error(ErrorCode::ClassOverflow, ctx + ": class_id " + std::to_string(cls));
        const auto conf = get_field<double>(d, "confidence", ctx);
        if (!(conf >= 0 && conf <= 1)) throw Error(ErrorCode::SchemaViolation, ctx + ": confidence outside [0,1]");
        p[cls].push_back({box_from(get_field<json>(d, "box", ctx), ctx), conf});
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      truths[c] += t[c].size();
      if (p[c].empty()) continue;
      std::vector<double> s;
      for (const auto& sb : p[c]) s.push_back(sb.score);
      const auto order = rank_by_score(s);
      const auto tp = match_predictions(p[c], t[c], opts.iou_threshold);
      for (std::size_t r = 0; r < order.size(); ++r) {
        scores[c].push_back(s[order[r]]);
        hits[c].push_back(tp[r]);
      }
    }
  }
  std::vector<double> ap(classes, -1.0);
  std::vector<bool> evaluable(classes, false);
  for (std::size_t c = 0; c < classes; ++c) {
    evaluable[c] = truths[c] > 0 || !scores[c].empty();
    if (evaluable[c]) ap[c] = average_precision_from_matches(scores[c], hits[c], truths[c]);
  }
  return {{"map", mean_of_evaluable(ap, evaluable)},
          {"per_class_ap", per_class_json(index.vocabulary, ap)},
          {"iou_threshold", opts.iou_threshold}};
}

PixelMap predicted_mask(const json& row, const std::string& ctx, const std::filesystem::path& base,
                        std::size_t num_classes) {
  if (row.contains("mask")) {
    std::filesystem::path p = get_field<std::string>(row, "mask", ctx);
    if (p.is_relative()) p = base / p;
    return load_mask(p, num_classes);
  }
  if (row.contains("rle")) {
    const auto w = get_field<std::size_t>(row, "width", ctx);
    const auto h = get_field<std::size_t>(row, "height", ctx);
    std::vector<std::pair<std::uint8_t, std::size_t>> runs;
    for (const auto& r : get_field<json>(row, "rle", ctx)) {
      if (!r.is_array() || r.size() != 2) throw Error(ErrorCode::SchemaViolation, ctx + ": rle entries are [class, run]");
      runs.emplace_back(r[0].get<std::uint8_t>(), r[1].get<std::size_t>());
    }
    return run_length_decode(runs, w, h, num_classes);
  }
  throw Error(ErrorCode::SchemaViolation, ctx + ": needs 'mask' or 'rle'");
}

json eval_segmentation(const EvalOptions& opts, const DatasetIndex& index) {
  const auto preds = predictions_by_sample(opts, index);
  const std::size_t classes = index.vocabulary.size();
  ConfusionMatrix cm(classes);
  for (const auto& sample : index.samples) {
    if (sample.kind != AnnotationKind::Mask) continue;
    const auto it = preds.find(sample.id);
    if (it == preds.end()) throw Error(ErrorCode::SchemaViolation, "no prediction for sample '" + sample.id + "'");
    const auto ctx = where(opts.predictions, it->second.first, sample.id);
    const PixelMap gt = load_mask(sample.mask, classes);
    const PixelMap pred = predicted_mask(it->second.second, ctx, opts.predictions.parent_path(), classes);
    try {
      cm = confusion_accumulate(gt, pred, std::move(cm));
    } catch (const Error& e) {
      throw Error(e.code(), ctx + ": " + e.what());
    }
  }
  const auto policy = opts.absent_class == "zero" ? AbsentClassPolicy::Zero : AbsentClassPolicy::Exclude;
  const auto r = miou(cm, policy);
  return {{"miou", r.miou}, {"per_class_iou", per_class_json(index.vocabulary, r.per_class_iou)},
          {"absent_class", opts.absent_class}, {"pixels", cm.total()}};
}

json eval_action(const EvalOptions& opts, const DatasetIndex& index) {
  const auto preds = predictions_by_sample(opts, index);
  const std::size_t classes = index.vocabulary.size();
  // Each window (sample) is one unit: a prediction is a TP for its class iff it names the true class.
  std::vector<std::vector<double>> scores(classes);
  std::vector<std::vector<bool>> hits(classes);
  std::vector<std::size_t> truths(classes, 0);
  std::size_t correct = 0, total = 0;
  for (const auto& sample : index.samples) {
    if (sample.kind != AnnotationKind::Action) continue;
    ++total;
    ++truths[sample.action_class];
    const auto it = preds.find(sample.id);
    if (it == preds.end()) continue;
    const auto ctx = where(opts.predictions, it->second.first, sample.id);
    const auto& row = it->second.second;
    const auto cls = get_field<std::size_t>(row, "class_id", ctx);
    if (cls >= classes) throw Error(ErrorCode::ClassOverflow, ctx + ": class_id " + std::to_string(cls));
    const double conf = row.contains("confidence") ? get_field<double>(row, "confidence", ctx) : 1.0;
    scores[cls].push_back(conf);
    hits[cls].push_back(cls == sample.action_class);
    correct += cls == sample.action_class;
  }
  std::vector<double> ap(classes, -1.0);
  std::vector<bool> evaluable(classes, false);
  for (std::size_t c = 0; c < classes; ++c) {
    evaluable[c] = truths[c] > 0 || !scores[c].empty();
    if (evaluable[c]) ap[c] = average_precision_from_matches(scores[c], hits[c], truths[c]);
  }
  return {{"map", mean_of_evaluable(ap, evaluable)},
          {"per_class_ap", per_class_json(index.vocabulary, ap)},
          {"accuracy", total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0}};
}

std::string eval_table(const json& report) {
  const std::string task = report["task"];
  const bool seg = report.contains("miou");
  const std::string metric = seg ? "miou" : "map";
  std::string fps = "n/a";
  if (report.contains("fps")) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << report["fps"].get<double>();
    fps = s.str();
  }
  std::ostringstream out;
  out << std::left << std::setw(10) << "measure" << task << '\n';
  out << std::setw(10) << "fps" << fps << '\n';
  out << std::setw(10) << metric << percent(report[metric].get<double>()) << '\n';
  return out.str();
}

RunLimit limit_from(std::optional<double> seconds, std::optional<std::size_t> frames) {
  RunLimit limit;
  if (seconds) limit.duration = std::chrono::microseconds(static_cast<std::int64_t>(std::llround(*seconds * 1e6)));
  limit.max_frames = frames;
  return limit;
}

SinkSpec parse_sink(const std::string& text) {
  SinkSpec spec;
  if (text.rfind("jsonl:", 0) == 0 && text.size() > 6) {
    spec.kind = SinkSpec::Kind::Jsonl;
    spec.path = text.substr(6);
    return spec;
  }
  if (text.rfind("tcp:", 0) == 0) {
    const auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon != std::string::npos && colon > 0) {
      try {
        const auto port = std::stoul(rest.substr(colon + 1));
        if (port > 0 && port < 65536) {
          spec.kind = SinkSpec::Kind::Tcp;
          spec.host = rest.substr(0, colon);
          spec.port = static_cast<std::uint16_t>(port);
          return spec;
        }
      } catch (const std::exception&) {
      }
    }
  }
  if (text == "null") return spec;
  throw Error(ErrorCode::InvalidArgument, "--sink: expected jsonl:PATH, tcp:HOST:PORT or null, got '" + text + "'");
}

double param(const AugmentCmdOptions& opts, std::size_t i, double fallback) {
  return i < opts.params.size() ? opts.params[i] : fallback;
}

}  // namespace

int eval_command(const EvalOptions& opts) {
  const Task task = parse_task(opts.task);
  const auto index = load_manifest(opts.manifest);
  check_manifest(index);
  if (!std::filesystem::exists(opts.predictions)) throw Error(ErrorCode::MissingFile, opts.predictions.string());

  json report;
  switch (task) {
    case Task::Detection: report = eval_detection(opts, index); break;
    case Task::Segmentation: report = eval_segmentation(opts, index); break;
    case Task::Action: report = eval_action(opts, index); break;
  }
  report["task"] = std::string(to_string(task));
  if (!opts.telemetry.empty()) {
    const auto tel = json::parse(read_file(opts.telemetry), nullptr, false);
    if (tel.is_discarded() || !tel.contains("fps")) {
      throw Error(ErrorCode::SchemaViolation, opts.telemetry.string() + ": not a telemetry summary");
    }
    report["fps"] = tel["fps"]["mean_fps"];
  }
  const std::string text = report.dump(2) + "\n";
  if (!opts.out.empty()) write_file(opts.out, text);
  std::cout << (opts.format == "table" ? eval_table(report) : text);
  return 0;
}

int bench_command(const BenchOptions& opts) {
  const auto config = load_pipeline_config(opts.config);
  const auto summary = run_pipeline(config, limit_from(opts.seconds, opts.frames));
  std::cout << summary.to_json() << '\n';
  if (summary.aborted()) {
    std::cerr << "bench: aborted: " << *summary.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int run_command(const RunOptions& opts) {
  auto config = load_pipeline_config(opts.config);
  if (!opts.sink.empty()) {
    const auto mask_dir = config.sink.mask_dir;
    config.sink = parse_sink(opts.sink);
    config.sink.mask_dir = mask_dir;
  }
  const auto summary = run_pipeline(config, limit_from(opts.seconds, opts.frames));
  std::cerr << "run: processed " << summary.processed << " of " << summary.ingested << " frames ("
            << summary.dropped << " dropped)\n";
  std::cout << summary.to_json() << '\n';
  if (summary.aborted()) {
    std::cerr << "run: aborted: " << *summary.abort_reason << '\n';
    return 1;
  }
  return 0;
}

int split_command(const SplitOptions& opts) {
  const auto index = load_manifest(opts.manifest);
  const auto folds = stratified_kfold(index, opts.k, opts.seed, opts.holdout);
  const auto text = folds.to_json();
  if (opts.out.empty()) {
    std::cout << text;
  } else {
    write_file(opts.out, text);
    std::cerr << "split: wrote " << folds.folds.size() << " samples in " << opts.k << " folds to " << opts.out.string()
              << '\n';
  }
  return 0;
}

int augment_command(const AugmentCmdOptions& opts) {
  static const std::vector<std::string> kOps = {"brightness", "rotate", "shear", "crop", "noise"};
  if (std::find(kOps.begin(), kOps.end(), opts.op) == kOps.end()) {
    throw Error(ErrorCode::InvalidArgument, "--op: unknown operation '" + opts.op + "'");
  }
  auto index = load_manifest(opts.manifest);
  std::filesystem::create_directories(opts.out_dir);
  const CounterRng root(opts.seed);
  const AugmentOptions aug{opts.min_visible};
  const std::size_t classes = index.vocabulary.size();

  auto transform = [&](const LabeledSample& in, CounterRng& rng) -> LabeledSample {
    const Size2D size{in.frame.width(), in.frame.height()};
    const PointF center{static_cast<double>(size.width) / 2, static_cast<double>(size.height) / 2};
    if (opts.op == "brightness") return {brightness_shift(in.frame, static_cast<int>(std::lround(param(opts, 0, 20)))), in.labels};
    if (opts.op == "noise") return {add_noise(in.frame, param(opts, 0, 8), rng), in.labels};
    if (opts.op == "rotate") return apply_affine(in, make_rotation(param(opts, 0, 15), center), size, aug);
    if (opts.op == "shear") {
      // Shear about the image centre so content stays in view.
      const auto t = compose(AffineTransform::translation(center.x, center.y),
                             compose(make_shear(param(opts, 0, 0.1), param(opts, 1, 0)),
                                     AffineTransform::translation(-center.x, -center.y)));
      return apply_affine(in, t, size, aug);
    }
    const Size2D crop_size{static_cast<std::size_t>(param(opts, 0, static_cast<double>(size.width) / 2)),
                           static_cast<std::size_t>(param(opts, 1, static_cast<double>(size.height) / 2))};
    return random_crop(in, crop_size, rng, aug);
  };

  std::size_t written = 0;
  for (std::size_t i = 0; i < index.samples.size(); ++i) {
    auto& sample = index.samples[i];
    CounterRng rng = root.fork(i);
    auto save = [&](const Frame& f, const std::string& stem) {
      const bool png = f.channels() == 1 || f.channels() == 3;
      const auto path = opts.out_dir / (stem + (png ? ".png" : ".avrw"));
      save_frame(f, path);
      return path;
    };
    switch (sample.kind) {
      case AnnotationKind::Detection: {
        if (sample.frame.empty()) break;
        auto out = transform({load_frame(sample.frame), sample.boxes}, rng);
        sample.frame = save(out.frame, sample.id);
        sample.boxes = std::get<std::vector<LabeledBox>>(out.labels);
        break;
      }
      case AnnotationKind::Mask: {
        auto out = transform({load_frame(sample.frame), load_mask(sample.mask, classes)}, rng);
        sample.frame = save(out.frame, sample.id);
        sample.mask = opts.out_dir / (sample.id + "_mask.png");
        save_mask(std::get<PixelMap>(out.labels), sample.mask);
        break;
      }
      case AnnotationKind::Action: {
        // The same draw sequence is replayed for every frame so the clip stays coherent.
        for (std::size_t f = 0; f < sample.action_frames.size(); ++f) {
          CounterRng frame_rng = rng;
          auto out = transform({load_frame(sample.action_frames[f]), std::monostate{}}, frame_rng);
          sample.action_frames[f] = save(out.frame, sample.id + "_" + std::to_string(f));
        }
        if (!sample.frame.empty()) {
          CounterRng frame_rng = rng;
          sample.frame = save(transform({load_frame(sample.frame), std::monostate{}}, frame_rng).frame, sample.id);
        }
        break;
      }
    }
    ++written;
  }
  write_file(opts.out_dir / "manifest.json", write_manifest(index, opts.out_dir) + "\n");
  std::cerr << "augment: " << opts.op << " applied to " << written << " samples\n";
  std::cout << json{{"op", opts.op}, {"seed", opts.seed}, {"samples", written},
                    {"manifest", (opts.out_dir / "manifest.json").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int decode_command(const DecodeOptions& opts) {
  const Task task = parse_task(opts.task);
  const auto doc = json::parse(read_file(opts.tensor), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::SchemaViolation, opts.tensor.string() + ": not valid JSON");
  FrameRecord record;
  record.task = task;
  switch (task) {
    case Task::Detection: {
      const auto t = std::get<GridTensor>(parse_raw_output(doc, task));
      const auto dets = decode_grid(t, opts.vocabulary);
      record.detections = nms(confidence_filter(dets, opts.confidence), opts.nms, opts.class_agnostic);
      break;
    }
    case Task::Segmentation: {
      const auto s = std::get<SegmentationLogits>(parse_raw_output(doc, task));
      record.mask = decode_segmentation(s.scores, s.width, s.height, s.num_classes);
      break;
    }
    case Task::Action: {
      // A single score vector, or a window of them.
      std::vector<ActionScores> window;
      const bool many = doc.is_array() && !doc.empty() && (doc[0].is_array() || doc[0].is_object());
      if (many) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
          window.push_back(std::get<ActionScores>(parse_raw_output(doc[i], task, "/" + std::to_string(i))));
        }
      } else {
        window.push_back(std::get<ActionScores>(parse_raw_output(doc, task)));
      }
      const auto d = decode_action(window);
      record.action = ActionResult{0, window.size() - 1, d.class_id, d.confidence};
      break;
    }
  }
  std::cout << serialize_record(record) << '\n';
  return 0;
}

int earlystop_command(const EarlyStopOptions& opts) {
  const std::string text = opts.series.empty() || opts.series == "-"
                               ? std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>())
                               : read_file(opts.series);
  EarlyStopState state;
  state.patience = opts.patience;
  state.min_delta = opts.min_delta;
  if (opts.mode == "max") state.mode = MetricMode::Maximize;
  else if (opts.mode == "min") state.mode = MetricMode::Minimize;
  else if (opts.mode == "auto") state.mode = infer_mode(opts.metric);
  else throw Error(ErrorCode::InvalidArgument, "--mode: expected max, min or auto");

  std::istringstream in(text);
  std::string line;
  std::int64_t epoch = 0;
  std::optional<std::int64_t> stop;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double value;
    try {
      std::size_t used = 0;
      value = std::stod(line, &used);
      if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "series line " + std::to_string(n) + ": not a number: '" + line + "'");
    }
    const auto step = early_stop_step(state, ++epoch, value);
    state = step.state;
    if (step.decision == StopDecision::Stop) {
      stop = epoch;
      break;
    }
  }
  json out{{"mode", state.mode == MetricMode::Maximize ? "max" : "min"},
           {"patience", state.patience},
           {"epochs_seen", epoch},
           {"stop_epoch", stop ? json(*stop) : json(nullptr)},
           {"best_epoch", state.best_epoch > 0 ? json(state.best_epoch) : json(nullptr)},
           {"best_value", state.best_value ? json(*state.best_value) : json(nullptr)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace aerovision::cli
