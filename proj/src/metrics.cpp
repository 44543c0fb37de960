#include "aerovision/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aerovision/error.hpp"

namespace aerovision {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<bool> match_predictions(std::span<const ScoredBox> predictions,
                                    std::span<const BoundingBox> truths, double iou_threshold) {
  std::vector<double> scores;
  scores.reserve(predictions.size());
  for (const auto& p : predictions) scores.push_back(p.score);
  const auto order = rank_by_score(scores);

  std::vector<bool> matched(truths.size(), false);
  std::vector<bool> tp(predictions.size(), false);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& pred = predictions[order[r]].box;
    double best = -1.0;
    std::size_t best_truth = truths.size();
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (matched[t]) continue;
      const double iou = box_iou(pred, truths[t]);
      if (iou > best) {
        best = iou;
        best_truth = t;
      }
    }
    if (best_truth < truths.size() && best >= iou_threshold) {
      matched[best_truth] = true;
      tp[r] = true;
    }
  }
  return tp;
}

PrCurve pr_curve(const std::vector<bool>& tp_by_rank, std::size_t num_truths) {
  PrCurve curve;
  curve.reserve(tp_by_rank.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_by_rank.size(); ++i) {
    if (tp_by_rank[i]) ++tp;
    const double recall = num_truths ? static_cast<double>(tp) / static_cast<double>(num_truths) : 0.0;
    curve.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return curve;
}

double interpolated_area(const PrCurve& curve) {
  // Precision envelope from the right: max precision at any recall >= r_i.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    area += (curve[i].recall - prev_recall) * envelope[i];
    prev_recall = curve[i].recall;
  }
  return area;
}

double average_precision_from_matches(std::span<const double> scores, const std::vector<bool>& is_tp,
                                      std::size_t num_truths) {
  if (scores.size() != is_tp.size()) {
    throw Error(ErrorCode::DimensionMismatch, "scores and match flags differ in length");
  }
  if (num_truths == 0) return scores.empty() ? 1.0 : 0.0;
  const auto order = rank_by_score(scores);
  std::vector<bool> ranked(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranked[r] = is_tp[order[r]];
  return interpolated_area(pr_curve(ranked, num_truths));
}

double average_precision(std::span<const ScoredBox> predictions, std::span<const BoundingBox> truths,
                         double iou_threshold) {
  if (truths.empty()) return predictions.empty() ? 1.0 : 0.0;
  return interpolated_area(pr_curve(match_predictions(predictions, truths, iou_threshold), truths.size()));
}

double mean_of_evaluable(std::span<const double> per_class_ap, const std::vector<bool>& evaluable) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < per_class_ap.size(); ++c) {
    if (!evaluable[c]) continue;
    sum += per_class_ap[c];
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::NoEvaluableClass, "no class has truths or predictions");
  return sum / static_cast<double>(n);
}

MapResult mean_average_precision(std::span<const ClassEvaluation> classes, double iou_threshold) {
  if (classes.empty()) throw Error(ErrorCode::NoEvaluableClass, "no classes given");
  MapResult out;
  std::vector<bool> evaluable(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    evaluable[c] = !cls.truths.empty() || !cls.predictions.empty();
    out.per_class_ap.push_back(evaluable[c] ? average_precision(cls.predictions, cls.truths, iou_threshold) : -1.0);
  }
  out.map = mean_of_evaluable(out.per_class_ap, evaluable);
  return out;
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

void ConfusionMatrix::add(std::size_t gt, std::size_t pred, std::uint64_t n) {
  if (gt >= num_classes_ || pred >= num_classes_) {
    throw Error(ErrorCode::ClassOverflow, "class index outside confusion matrix");
  }
  counts_[gt * num_classes_ + pred] += n;
  total_ += n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw Error(ErrorCode::DimensionMismatch, "merging confusion matrices of different sizes");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  return *this;
}

ConfusionMatrix confusion_accumulate(const PixelMap& gt, const PixelMap& pred, ConfusionMatrix acc) {
  if (gt.width() != pred.width() || gt.height() != pred.height() || gt.num_classes() != pred.num_classes() ||
      acc.num_classes() != gt.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch,
                "ground truth " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()) + "/" +
                    std::to_string(gt.num_classes()) + " vs prediction " + std::to_string(pred.width()) + "x" +
                    std::to_string(pred.height()) + "/" + std::to_string(pred.num_classes()));
  }
  const auto g = gt.labels();
  const auto p = pred.labels();
  for (std::size_t i = 0; i < g.size(); ++i) acc.add(g[i], p[i]);
  return acc;
}

MiouResult miou(const ConfusionMatrix& matrix, AbsentClassPolicy policy) {
  if (matrix.total() == 0) throw Error(ErrorCode::EmptyMatrix, "no pixels evaluated");
  const std::size_t n = matrix.num_classes();
  MiouResult out;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += matrix.at(c, k);
      col += matrix.at(k, c);
    }
    const std::uint64_t tp = matrix.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) {
      out.per_class_iou.push_back(-1.0);
      if (policy == AbsentClassPolicy::Zero) ++counted;
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    out.per_class_iou.push_back(iou);
    sum += iou;
    ++counted;
  }
  out.miou = counted ? sum / static_cast<double>(counted) : 0.0;
  return out;
}

double nearest_rank_percentile(std::span<const double> values, double p) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

FpsStats fps_stats(std::span<const std::int64_t> timestamps_us, std::span<const double> latencies_us) {
  if (timestamps_us.size() < 2) {
    throw Error(ErrorCode::TooFewFrames, std::to_string(timestamps_us.size()) + " timestamps");
  }
  for (std::size_t i = 1; i < timestamps_us.size(); ++i) {
    if (timestamps_us[i] <= timestamps_us[i - 1]) {
      throw Error(ErrorCode::InvalidArgument, "timestamps must be strictly increasing");
    }
  }
  for (double l : latencies_us) {
    if (l < 0) throw Error(ErrorCode::InvalidArgument, "negative latency");
  }
  FpsStats s;
  s.frame_count = timestamps_us.size();
  s.duration_s = static_cast<double>(timestamps_us.back() - timestamps_us.front()) / 1e6;
  s.mean_fps = static_cast<double>(s.frame_count - 1) / s.duration_s;
  s.p50_latency_us = nearest_rank_percentile(latencies_us, 50);
  s.p95_latency_us = nearest_rank_percentile(latencies_us, 95);
  return s;
}

}  // namespace aerovision
