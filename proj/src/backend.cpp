#include "aerovision/backend.hpp"

#include <cmath>
#include <thread>

#include "aerovision/error.hpp"

namespace aerovision {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Detection: return "detection";
    case Task::Segmentation: return "segmentation";
    case Task::Action: return "action";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "detection") return Task::Detection;
  if (text == "segmentation") return Task::Segmentation;
  if (text == "action") return Task::Action;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(text) + "'");
}

namespace {

void check_entry(Task task, const RawOutput& entry, const RawOutput& first, std::size_t index) {
  const std::string where = "script entry " + std::to_string(index);
  switch (task) {
    case Task::Detection: {
      const auto* t = std::get_if<GridTensor>(&entry);
      if (!t) throw Error(ErrorCode::ScriptDimensionMismatch, where + " is not a grid tensor");
      if (t->values.size() != t->expected_size() || t->anchors.empty() || t->num_classes == 0) {
        throw Error(ErrorCode::ScriptDimensionMismatch, where + " value count disagrees with grid shape");
      }
      const auto& f = std::get<GridTensor>(first);
      if (t->num_classes != f.num_classes) {
        throw Error(ErrorCode::ScriptDimensionMismatch, where + " class count differs from entry 0");
      }
      break;
    }
    case Task::Segmentation: {
      const auto* s = std::get_if<SegmentationLogits>(&entry);
      if (!s) throw Error(ErrorCode::ScriptDimensionMismatch, where + " is not a logit map");
      if (s->num_classes == 0 || s->scores.size() != s->width * s->height * s->num_classes) {
        throw Error(ErrorCode::ScriptDimensionMismatch, where + " score count disagrees with its shape");
      }
      const auto& f = std::get<SegmentationLogits>(first);
      if (s->width != f.width || s->height != f.height || s->num_classes != f.num_classes) {
        throw Error(ErrorCode::ScriptDimensionMismatch, where + " shape differs from entry 0");
      }
      break;
    }
    case Task::Action:
      if (!std::holds_alternative<ActionScores>(entry)) {
        throw Error(ErrorCode::ScriptDimensionMismatch, where + " is not a 6-class score vector");
      }
      break;
  }
}

}  // namespace

MockBackend::MockBackend(Task task, std::chrono::microseconds latency, std::vector<RawOutput> script,
                         ChannelLayout input_layout)
    : task_(task), latency_(latency), script_(std::move(script)), input_layout_(input_layout) {
  if (script_.empty()) throw Error(ErrorCode::ScriptDimensionMismatch, "empty script");
  if (latency_.count() < 0) throw Error(ErrorCode::InvalidArgument, "negative latency");
  // The first entry's kind is checked before comparing shapes against it.
  check_entry(task_, script_.front(), script_.front(), 0);
  for (std::size_t i = 1; i < script_.size(); ++i) check_entry(task_, script_[i], script_.front(), i);
}

RawOutput MockBackend::infer(const Frame& frame) {
  const auto deadline = std::chrono::steady_clock::now() + latency_;
  if (fail_on_ && *fail_on_ == frame.frame_id) {
    throw Error(ErrorCode::BackendFailure, "injected failure on frame " + std::to_string(frame.frame_id));
  }
  RawOutput out = script_[frame.frame_id % script_.size()];
  if (latency_.count() > 0) std::this_thread::sleep_until(deadline);
  return out;
}

GridTensor script_single_detection(const BoundingBox& box, std::size_t class_id, std::size_t num_classes) {
  GridTensor t;
  t.grid_w = 1;
  t.grid_h = 1;
  t.num_classes = num_classes;
  const double cx = (box.x_min + box.x_max) / 2;
  const double cy = (box.y_min + box.y_max) / 2;
  t.anchors = {{box.width(), box.height()}};
  auto logit = [](double p) { return static_cast<float>(std::log(p / (1.0 - p))); };
  t.values.assign(5 + num_classes, -20.0f);
  t.values[0] = logit(cx);
  t.values[1] = logit(cy);
  t.values[2] = 0.0f;
  t.values[3] = 0.0f;
  t.values[4] = 20.0f;
  t.values[5 + class_id] = 20.0f;
  return t;
}

}  // namespace aerovision
