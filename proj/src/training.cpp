#include "aerovision/training.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "aerovision/error.hpp"

namespace aerovision {

MetricMode infer_mode(std::string_view metric_name) {
  std::string name(metric_name);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const char* key : {"map", "miou", "iou", "ap", "acc", "precision", "recall", "f1"}) {
    if (name.rfind(key, 0) == 0) return MetricMode::Maximize;
  }
  return MetricMode::Minimize;
}

EarlyStopStep early_stop_step(const EarlyStopState& state, std::int64_t epoch, double metric) {
  if (state.last_epoch >= 0 && epoch <= state.last_epoch) {
    throw Error(ErrorCode::NonMonotonicEpoch,
                "epoch " + std::to_string(epoch) + " after " + std::to_string(state.last_epoch));
  }
  EarlyStopStep out{state, StopDecision::Continue};
  auto& s = out.state;
  s.last_epoch = epoch;

  bool improved = !s.best_value.has_value();
  if (!improved) {
    improved = s.mode == MetricMode::Maximize ? metric > *s.best_value + s.min_delta
                                              : metric < *s.best_value - s.min_delta;
  }
  if (improved) {
    s.best_value = metric;
    s.best_epoch = epoch;
    s.epochs_since_improvement = 0;
  } else {
    ++s.epochs_since_improvement;
  }
  if (s.epochs_since_improvement >= s.patience && !improved) out.decision = StopDecision::Stop;
  return out;
}

FoldSummary fold_average(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyScores, "no fold scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  const double mean = sum / static_cast<double>(scores.size());
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  return {mean, std::sqrt(sq / static_cast<double>(scores.size()))};
}

}  // namespace aerovision
