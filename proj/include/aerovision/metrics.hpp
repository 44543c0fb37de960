#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aerovision/annotations.hpp"
#include "aerovision/imaging.hpp"

namespace aerovision {

double box_iou(const BoundingBox& a, const BoundingBox& b);

struct ScoredBox {
  BoundingBox box;
  double score = 0;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

/// Precision/recall after each prediction in rank order.
using PrCurve = std::vector<PrPoint>;

/// Ranks by descending score; equal scores keep input order.
std::vector<std::size_t> rank_by_score(std::span<const double> scores);

/// Greedy matching in rank order: a prediction is a true positive when its best
/// IoU against a still-unmatched truth is >= threshold (IoU ties go to the lowest
/// truth index). Returns TP flags indexed by rank position.
std::vector<bool> match_predictions(std::span<const ScoredBox> predictions,
                                    std::span<const BoundingBox> truths, double iou_threshold);

PrCurve pr_curve(const std::vector<bool>& tp_by_rank, std::size_t num_truths);

/// All-point interpolated area under `curve`:
/// sum over i of (r_i - r_{i-1}) * max{precision at recall >= r_i}.
double interpolated_area(const PrCurve& curve);

/// AP for one class. Zero truths: 1.0 with no predictions, else 0.0.
double average_precision(std::span<const ScoredBox> predictions, std::span<const BoundingBox> truths,
                         double iou_threshold);

/// AP when predictions are already matched (used for action windows, where a
/// window is a unit and a prediction is correct iff it names the true class).
double average_precision_from_matches(std::span<const double> scores, const std::vector<bool>& is_tp,
                                      std::size_t num_truths);

struct ClassEvaluation {
  std::vector<ScoredBox> predictions;
  std::vector<BoundingBox> truths;
};

struct MapResult {
  double map = 0;
  /// Per-class AP; entries for classes without truths or predictions are -1.
  std::vector<double> per_class_ap;
};

/// Unweighted mean over classes with at least one truth or prediction.
/// Throws NoEvaluableClass when no class qualifies.
MapResult mean_average_precision(std::span<const ClassEvaluation> classes, double iou_threshold);
/// Same rule for precomputed per-class APs; `evaluable[c]` marks qualifying classes.
double mean_of_evaluable(std::span<const double> per_class_ap, const std::vector<bool>& evaluable);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes = 0);

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * num_classes_ + pred]; }
  std::uint64_t total() const { return total_; }
  void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1);

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t num_classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Adds one count per pixel at [gt][pred]. Throws DimensionMismatch.
ConfusionMatrix confusion_accumulate(const PixelMap& gt, const PixelMap& pred, ConfusionMatrix acc);

enum class AbsentClassPolicy { Exclude, Zero };

struct MiouResult {
  /// IoU per class; -1 marks classes with an empty union.
  std::vector<double> per_class_iou;
  double miou = 0;
};

/// IoU_c = TP / (TP + FP + FN). Empty-union classes are left out of the mean
/// (Exclude) or count as 0 (Zero). Throws EmptyMatrix.
MiouResult miou(const ConfusionMatrix& matrix, AbsentClassPolicy policy = AbsentClassPolicy::Exclude);

struct FpsStats {
  std::size_t frame_count = 0;
  double duration_s = 0;
  double mean_fps = 0;
  double p50_latency_us = 0;
  double p95_latency_us = 0;
};

/// Nearest-rank percentile (p in (0,100]) of an unsorted list; 0 for an empty list.
double nearest_rank_percentile(std::span<const double> values, double p);

/// mean FPS = (n - 1) * 1e6 / (t_last - t_first). Throws TooFewFrames when fewer
/// than two timestamps are given and InvalidArgument unless strictly increasing.
FpsStats fps_stats(std::span<const std::int64_t> timestamps_us, std::span<const double> latencies_us);

}  // namespace aerovision
