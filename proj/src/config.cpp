#include "aerovision/config.hpp"

#include <fstream>
#include <sstream>

#include "aerovision/error.hpp"

namespace aerovision {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, (pointer.empty() ? "/" : pointer) + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& pointer) {
  if (!obj.is_object()) violation(pointer, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) violation(pointer + "/" + key, "missing");
  return *it;
}

double number(const json& v, const std::string& pointer) {
  if (!v.is_number()) violation(pointer, "expected number");
  return v.get<double>();
}

std::size_t count(const json& v, const std::string& pointer) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) violation(pointer, "expected non-negative integer");
  return v.get<std::size_t>();
}

std::string text(const json& v, const std::string& pointer) {
  if (!v.is_string()) violation(pointer, "expected string");
  return v.get<std::string>();
}

std::vector<float> floats(const json& v, const std::string& pointer) {
  if (!v.is_array()) violation(pointer, "expected array");
  std::vector<float> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(static_cast<float>(number(v[i], pointer + "/" + std::to_string(i))));
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

ChannelLayout layout_field(const json& v, const std::string& pointer) {
  try {
    return parse_layout(text(v, pointer));
  } catch (const Error& e) {
    violation(pointer, e.what());
  }
}

}  // namespace

RawOutput parse_raw_output(const json& value, Task task, const std::string& pointer) {
  switch (task) {
    case Task::Detection: {
      const std::size_t classes = count(field(value, "num_classes", pointer), pointer + "/num_classes");
      if (value.contains("detection")) {
        const auto& det = value["detection"];
        const auto box = floats(field(det, "box", pointer + "/detection"), pointer + "/detection/box");
        if (box.size() != 4) violation(pointer + "/detection/box", "expected 4 coordinates");
        const BoundingBox b{box[0], box[1], box[2], box[3]};
        if (!b.is_valid() || b.x_min <= 0 || b.y_min <= 0 || b.x_max >= 1 || b.y_max >= 1) {
          violation(pointer + "/detection/box", "box must lie strictly inside (0,1)");
        }
        const std::size_t cls = count(field(det, "class_id", pointer + "/detection"), pointer + "/detection/class_id");
        if (cls >= classes) violation(pointer + "/detection/class_id", "exceeds num_classes");
        return script_single_detection(b, cls, classes);
      }
      GridTensor t;
      t.num_classes = classes;
      t.grid_w = count(field(value, "grid_w", pointer), pointer + "/grid_w");
      t.grid_h = count(field(value, "grid_h", pointer), pointer + "/grid_h");
      const auto& anchors = field(value, "anchors", pointer);
      if (!anchors.is_array()) violation(pointer + "/anchors", "expected array");
      for (std::size_t i = 0; i < anchors.size(); ++i) {
        const auto a = floats(anchors[i], pointer + "/anchors/" + std::to_string(i));
        if (a.size() != 2) violation(pointer + "/anchors/" + std::to_string(i), "expected [w, h]");
        t.anchors.push_back({a[0], a[1]});
      }
      t.values = floats(field(value, "values", pointer), pointer + "/values");
      if (t.values.size() != t.expected_size()) {
        violation(pointer + "/values", "holds " + std::to_string(t.values.size()) + " values, grid implies " +
                                           std::to_string(t.expected_size()));
      }
      return t;
    }
    case Task::Segmentation: {
      SegmentationLogits s;
      s.width = count(field(value, "width", pointer), pointer + "/width");
      s.height = count(field(value, "height", pointer), pointer + "/height");
      s.num_classes = count(field(value, "num_classes", pointer), pointer + "/num_classes");
      if (value.contains("fill_class")) {
        const std::size_t k = count(value["fill_class"], pointer + "/fill_class");
        if (k >= s.num_classes) violation(pointer + "/fill_class", "exceeds num_classes");
        s.scores.assign(s.width * s.height * s.num_classes, 0.0f);
        for (std::size_t i = 0; i < s.width * s.height; ++i) s.scores[i * s.num_classes + k] = 1.0f;
      } else {
        s.scores = floats(field(value, "scores", pointer), pointer + "/scores");
        if (s.scores.size() != s.width * s.height * s.num_classes) {
          violation(pointer + "/scores", "size disagrees with width*height*num_classes");
        }
      }
      return s;
    }
    case Task::Action: {
      const json& arr = value.is_object() ? field(value, "scores", pointer) : value;
      const auto v = floats(arr, pointer);
      if (v.size() != kNumActions) violation(pointer, "expected 6 action scores");
      ActionScores scores{};
      std::copy(v.begin(), v.end(), scores.begin());
      return scores;
    }
  }
  violation(pointer, "unknown task");
}

json raw_output_to_json(const RawOutput& output) {
  if (const auto* t = std::get_if<GridTensor>(&output)) {
    json anchors = json::array();
    for (const auto& a : t->anchors) anchors.push_back({a.width, a.height});
    return {{"grid_w", t->grid_w}, {"grid_h", t->grid_h}, {"num_classes", t->num_classes},
            {"anchors", anchors}, {"values", t->values}};
  }
  if (const auto* s = std::get_if<SegmentationLogits>(&output)) {
    return {{"width", s->width}, {"height", s->height}, {"num_classes", s->num_classes}, {"scores", s->scores}};
  }
  const auto& a = std::get<ActionScores>(output);
  return json(std::vector<float>(a.begin(), a.end()));
}

PipelineConfig parse_pipeline_config(std::string_view document, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    violation("", std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) violation("", "config must be an object");

  PipelineConfig cfg;
  try {
    cfg.task = parse_task(text(field(root, "task", ""), "/task"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SchemaViolation) throw;
    violation("/task", e.what());
  }

  const auto& src = field(root, "source", "");
  const auto type = text(field(src, "type", "/source"), "/source/type");
  if (type == "synthetic") {
    cfg.source.kind = SourceSpec::Kind::Synthetic;
    cfg.source.fps = number(field(src, "fps", "/source"), "/source/fps");
    if (!(cfg.source.fps > 0)) violation("/source/fps", "must be > 0");
    if (src.contains("width")) cfg.source.width = count(src["width"], "/source/width");
    if (src.contains("height")) cfg.source.height = count(src["height"], "/source/height");
    if (src.contains("frames")) cfg.source.frame_count = count(src["frames"], "/source/frames");
    if (src.contains("seconds")) cfg.source.duration_s = number(src["seconds"], "/source/seconds");
  } else if (type == "directory" || type == "raw_stream") {
    cfg.source.kind = type == "directory" ? SourceSpec::Kind::Directory : SourceSpec::Kind::RawStream;
    cfg.source.path = resolve(base_dir, text(field(src, "path", "/source"), "/source/path"));
    if (src.contains("fps")) cfg.source.fps = number(src["fps"], "/source/fps");
  } else {
    violation("/source/type", "unknown source type '" + type + "'");
  }
  if (src.contains("layout")) cfg.source.layout = layout_field(src["layout"], "/source/layout");

  const auto& be = field(root, "backend", "");
  cfg.backend.type = text(field(be, "type", "/backend"), "/backend/type");
  if (cfg.backend.type != "mock") violation("/backend/type", "unknown backend '" + cfg.backend.type + "'");
  if (be.contains("latency_us")) {
    const double us = number(be["latency_us"], "/backend/latency_us");
    if (us < 0) violation("/backend/latency_us", "must be >= 0");
    cfg.backend.latency = std::chrono::microseconds(static_cast<std::int64_t>(us));
  } else if (be.contains("latency_ms")) {
    const double ms = number(be["latency_ms"], "/backend/latency_ms");
    if (ms < 0) violation("/backend/latency_ms", "must be >= 0");
    cfg.backend.latency = std::chrono::microseconds(static_cast<std::int64_t>(ms * 1000));
  }
  if (be.contains("input_layout")) cfg.backend.input_layout = layout_field(be["input_layout"], "/backend/input_layout");
  const auto& script = field(be, "script", "/backend");
  if (!script.is_array() || script.empty()) violation("/backend/script", "expected non-empty array");
  for (std::size_t i = 0; i < script.size(); ++i) {
    cfg.backend.script.push_back(parse_raw_output(script[i], cfg.task, "/backend/script/" + std::to_string(i)));
  }

  if (root.contains("queue_capacity")) {
    cfg.queue_capacity = count(root["queue_capacity"], "/queue_capacity");
    if (cfg.queue_capacity < 1) violation("/queue_capacity", "must be >= 1");
  }
  if (root.contains("drop_policy")) {
    const auto policy = text(root["drop_policy"], "/drop_policy");
    if (policy == "drop_oldest") cfg.drop_policy = DropPolicy::DropOldest;
    else if (policy == "block") cfg.drop_policy = DropPolicy::Block;
    else violation("/drop_policy", "expected drop_oldest or block");
  }

  if (root.contains("sink")) {
    const auto& sk = root["sink"];
    const auto kind = text(field(sk, "type", "/sink"), "/sink/type");
    if (kind == "null") {
      cfg.sink.kind = SinkSpec::Kind::Null;
    } else if (kind == "jsonl") {
      cfg.sink.kind = SinkSpec::Kind::Jsonl;
      cfg.sink.path = resolve(base_dir, text(field(sk, "path", "/sink"), "/sink/path"));
    } else if (kind == "tcp") {
      cfg.sink.kind = SinkSpec::Kind::Tcp;
      cfg.sink.host = text(field(sk, "host", "/sink"), "/sink/host");
      const auto port = count(field(sk, "port", "/sink"), "/sink/port");
      if (port == 0 || port > 65535) violation("/sink/port", "out of range");
      cfg.sink.port = static_cast<std::uint16_t>(port);
    } else {
      violation("/sink/type", "unknown sink '" + kind + "'");
    }
    if (sk.contains("mask_dir")) cfg.sink.mask_dir = resolve(base_dir, text(sk["mask_dir"], "/sink/mask_dir"));
  }

  if (root.contains("thresholds")) {
    const auto& th = root["thresholds"];
    if (th.contains("confidence")) cfg.thresholds.confidence = number(th["confidence"], "/thresholds/confidence");
    if (th.contains("nms")) cfg.thresholds.nms_iou = number(th["nms"], "/thresholds/nms");
    if (th.contains("class_agnostic")) {
      if (!th["class_agnostic"].is_boolean()) violation("/thresholds/class_agnostic", "expected boolean");
      cfg.thresholds.class_agnostic_nms = th["class_agnostic"].get<bool>();
    }
  }
  if (root.contains("vocabulary")) {
    const auto& vocab = root["vocabulary"];
    if (!vocab.is_array()) violation("/vocabulary", "expected array");
    for (std::size_t i = 0; i < vocab.size(); ++i) cfg.vocabulary.push_back(text(vocab[i], "/vocabulary/" + std::to_string(i)));
  }
  if (root.contains("band_selection")) {
    const auto& bands = root["band_selection"];
    if (!bands.is_array()) violation("/band_selection", "expected array");
    for (std::size_t i = 0; i < bands.size(); ++i) cfg.band_selection.push_back(count(bands[i], "/band_selection/" + std::to_string(i)));
  }
  if (root.contains("action_window")) {
    const auto& w = root["action_window"];
    if (w.contains("length")) cfg.action_window.length = count(w["length"], "/action_window/length");
    if (w.contains("stride")) cfg.action_window.stride = count(w["stride"], "/action_window/stride");
  }

  if (cfg.task == Task::Detection && !cfg.vocabulary.empty()) {
    const auto classes = std::get<GridTensor>(cfg.backend.script.front()).num_classes;
    if (classes != cfg.vocabulary.size()) violation("/vocabulary", "size differs from the script's num_classes");
  }
  try {
    cfg.check();
  } catch (const Error& e) {
    violation("", e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_pipeline_config(buffer.str(), path.parent_path());
}

}  // namespace aerovision
