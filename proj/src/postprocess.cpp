#include "aerovision/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aerovision/error.hpp"
#include "aerovision/metrics.hpp"

namespace aerovision {

namespace {

constexpr double kMinExtent = 1e-6;

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<Detection> decode_grid(const GridTensor& t, std::span<const std::string> vocabulary) {
  if (t.grid_w == 0 || t.grid_h == 0 || t.anchors.empty() || t.num_classes == 0) {
    throw Error(ErrorCode::MalformedTensor, "empty grid, anchor list or class list");
  }
  if (t.values.size() != t.expected_size()) {
    throw Error(ErrorCode::MalformedTensor, "tensor holds " + std::to_string(t.values.size()) +
                                                " values, expected " + std::to_string(t.expected_size()));
  }
  if (!vocabulary.empty() && vocabulary.size() != t.num_classes) {
    throw Error(ErrorCode::MalformedTensor, "vocabulary size differs from tensor class count");
  }
  for (const auto& a : t.anchors) {
    if (!(a.width > 0) || !(a.height > 0)) throw Error(ErrorCode::MalformedTensor, "non-positive anchor");
  }

  std::vector<Detection> out;
  out.reserve(t.grid_w * t.grid_h * t.anchors.size());
  std::vector<double> probs(t.num_classes);
  for (std::size_t cy = 0; cy < t.grid_h; ++cy) {
    for (std::size_t cx = 0; cx < t.grid_w; ++cx) {
      for (std::size_t a = 0; a < t.anchors.size(); ++a) {
        const float* v = t.entry(cx, cy, a);
        const double center_x = (sigmoid(v[0]) + static_cast<double>(cx)) / static_cast<double>(t.grid_w);
        const double center_y = (sigmoid(v[1]) + static_cast<double>(cy)) / static_cast<double>(t.grid_h);
        const double w = std::max(t.anchors[a].width * std::exp(static_cast<double>(v[2])), kMinExtent);
        const double h = std::max(t.anchors[a].height * std::exp(static_cast<double>(v[3])), kMinExtent);

        // Softmax with the max subtracted; argmax keeps the first maximum.
        const float* logits = v + 5;
        std::size_t best = 0;
        for (std::size_t c = 1; c < t.num_classes; ++c) {
          if (logits[c] > logits[best]) best = c;
        }
        double denom = 0.0;
        for (std::size_t c = 0; c < t.num_classes; ++c) {
          probs[c] = std::exp(static_cast<double>(logits[c]) - static_cast<double>(logits[best]));
          denom += probs[c];
        }

        Detection d;
        d.box = {std::clamp(center_x - w / 2, 0.0, 1.0), std::clamp(center_y - h / 2, 0.0, 1.0),
                 std::clamp(center_x + w / 2, 0.0, 1.0), std::clamp(center_y + h / 2, 0.0, 1.0)};
        d.class_id = best;
        if (!vocabulary.empty()) d.class_name = vocabulary[best];
        d.confidence = std::clamp(sigmoid(v[4]) * (probs[best] / denom), 0.0, 1.0);
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

std::vector<Detection> confidence_filter(std::span<const Detection> detections, double threshold) {
  std::vector<Detection> out;
  std::copy_if(detections.begin(), detections.end(), std::back_inserter(out),
               [threshold](const Detection& d) { return d.confidence >= threshold; });
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold, bool class_agnostic) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<bool> suppressed(detections.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& keep = detections[order[i]];
    if (suppressed[order[i]]) continue;
    kept.push_back(keep);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      auto& other = detections[order[j]];
      if (suppressed[order[j]]) continue;
      if (!class_agnostic && other.class_id != keep.class_id) continue;
      if (box_iou(keep.box, other.box) > iou_threshold) suppressed[order[j]] = true;
    }
  }
  return kept;
}

PixelMap decode_segmentation(std::span<const float> logits, std::size_t width, std::size_t height,
                             std::size_t num_classes) {
  if (num_classes == 0 || logits.size() != width * height * num_classes) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(logits.size()) + " scores for " +
                                                  std::to_string(width) + "x" + std::to_string(height) + "x" +
                                                  std::to_string(num_classes));
  }
  if (num_classes > 256) throw Error(ErrorCode::ClassOverflow, "more than 256 classes");
  std::vector<std::uint8_t> labels(width * height);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float* px = logits.data() + i * num_classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes; ++c) {
      if (px[c] > px[best]) best = c;
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return PixelMap(width, height, num_classes, std::move(labels));
}

ActionDecision decode_action(std::span<const ActionScores> window_scores) {
  if (window_scores.empty()) throw Error(ErrorCode::EmptyWindow, "no frames in action window");
  std::array<double, kNumActions> mean{};
  for (const auto& frame : window_scores) {
    for (std::size_t c = 0; c < kNumActions; ++c) mean[c] += frame[c];
  }
  for (auto& m : mean) m /= static_cast<double>(window_scores.size());

  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumActions; ++c) {
    if (mean[c] > mean[best]) best = c;
  }
  double denom = 0.0;
  for (std::size_t c = 0; c < kNumActions; ++c) denom += std::exp(mean[c] - mean[best]);
  return {best, 1.0 / denom};
}

}  // namespace aerovision
