#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aerovision/annotations.hpp"
#include "aerovision/imaging.hpp"

namespace aerovision {

struct Detection {
  BoundingBox box;
  std::size_t class_id = 0;
  std::string class_name;
  double confidence = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Anchor {
  double width = 0;   // normalized
  double height = 0;  // normalized
};

/// Single-head detector output. `values` is laid out [cy][cx][anchor][5 + C]
/// with per-entry order (tx, ty, tw, th, objectness_logit, class_logits...).
struct GridTensor {
  std::size_t grid_w = 0;
  std::size_t grid_h = 0;
  std::size_t num_classes = 0;
  std::vector<Anchor> anchors;
  std::vector<float> values;

  std::size_t stride() const { return 5 + num_classes; }
  std::size_t expected_size() const { return grid_w * grid_h * anchors.size() * stride(); }
  const float* entry(std::size_t cx, std::size_t cy, std::size_t anchor) const {
    return values.data() + ((cy * grid_w + cx) * anchors.size() + anchor) * stride();
  }
};

double sigmoid(double x);

/// YOLO-style decode of every cell/anchor:
///   center = ((sigmoid(tx) + cx) / grid_w, (sigmoid(ty) + cy) / grid_h)
///   size   = (anchor_w * exp(tw), anchor_h * exp(th))
///   confidence = sigmoid(obj) * max softmax(class_logits), class = argmax (lowest on ties)
/// Boxes are converted to corner form and clipped to [0,1]. Throws MalformedTensor.
/// `vocabulary`, when non-empty, must have num_classes entries and fills class_name.
std::vector<Detection> decode_grid(const GridTensor& tensor, std::span<const std::string> vocabulary = {});

std::vector<Detection> confidence_filter(std::span<const Detection> detections, double threshold);

/// Greedy NMS: keep the most confident remaining detection (ties to the lower
/// input index) and suppress others with IoU > threshold; only same-class
/// detections suppress each other unless `class_agnostic`. Output is in
/// selection order.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold,
                           bool class_agnostic = false);

/// Per-pixel argmax over `logits` laid out [y][x][class]; ties to the lowest class.
PixelMap decode_segmentation(std::span<const float> logits, std::size_t width, std::size_t height,
                             std::size_t num_classes);

inline constexpr std::size_t kNumActions = 6;
inline constexpr std::array<const char*, kNumActions> kActionNames = {
    "standing_idle", "walk", "run", "crouch", "aim", "throw"};

using ActionScores = std::array<float, kNumActions>;

struct ActionResult {
  std::uint64_t start_frame = 0;
  std::uint64_t end_frame = 0;
  std::size_t class_id = 0;
  double confidence = 0;

  const char* class_name() const { return kActionNames[class_id]; }
};

struct ActionDecision {
  std::size_t class_id = 0;
  double confidence = 0;
};

/// Averages the per-frame score vectors, applies softmax, then takes the argmax
/// (lowest class on ties). Throws EmptyWindow.
ActionDecision decode_action(std::span<const ActionScores> window_scores);

}  // namespace aerovision
