#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aerovision/imaging.hpp"
#include "aerovision/postprocess.hpp"

namespace aerovision {

enum class Task { Detection, Segmentation, Action };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// Per-pixel class scores laid out [y][x][class].
struct SegmentationLogits {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t num_classes = 0;
  std::vector<float> scores;
};

using RawOutput = std::variant<GridTensor, SegmentationLogits, ActionScores>;

/// Hardware-independent inference interface. Implementations return the raw
/// task output for a frame once their processing latency has elapsed.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;

  virtual Task task() const = 0;
  virtual ChannelLayout input_layout() const { return ChannelLayout::rgb(); }
  virtual RawOutput infer(const Frame& frame) = 0;
};

/// Test double standing in for a trained network: returns
/// script[frame_id % script.size()] after sleeping `latency`.
class MockBackend final : public InferenceBackend {
 public:
  /// Throws ScriptDimensionMismatch when script entries do not match `task`
  /// or disagree with each other in shape.
  MockBackend(Task task, std::chrono::microseconds latency, std::vector<RawOutput> script,
              ChannelLayout input_layout = ChannelLayout::rgb());

  Task task() const override { return task_; }
  ChannelLayout input_layout() const override { return input_layout_; }
  RawOutput infer(const Frame& frame) override;

  /// Makes infer() throw BackendFailure for this frame id (fault injection).
  void fail_on_frame(std::uint64_t frame_id) { fail_on_ = frame_id; }

 private:
  Task task_;
  std::chrono::microseconds latency_;
  std::vector<RawOutput> script_;
  ChannelLayout input_layout_;
  std::optional<std::uint64_t> fail_on_;
};

/// A 1x1-grid, single-anchor tensor whose decode yields `box` for `class_id`
/// with a confidence close to 1 (large objectness and class logits).
GridTensor script_single_detection(const BoundingBox& box, std::size_t class_id, std::size_t num_classes);

}  // namespace aerovision
