#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace aerovision {

enum class MetricMode { Maximize, Minimize };

/// MAXIMIZE for accuracy-style names (map, miou, iou, ap, acc*), MINIMIZE otherwise.
MetricMode infer_mode(std::string_view metric_name);

struct EarlyStopState {
  std::size_t patience = 0;
  double min_delta = 0.0;
  MetricMode mode = MetricMode::Maximize;

  std::optional<double> best_value;
  std::int64_t best_epoch = -1;
  std::int64_t last_epoch = -1;
  std::size_t epochs_since_improvement = 0;
};

enum class StopDecision { Continue, Stop };

struct EarlyStopStep {
  EarlyStopState state;
  StopDecision decision = StopDecision::Continue;
};

/// One transition. A value improves when it beats the best by more than
/// min_delta in the mode's direction; the first observation always improves.
/// STOP is returned once the counter reaches patience. Throws NonMonotonicEpoch
/// when `epoch` does not exceed the previous one.
EarlyStopStep early_stop_step(const EarlyStopState& state, std::int64_t epoch, double metric);

struct FoldSummary {
  double mean = 0;
  double stddev = 0;  // population
};

/// Throws EmptyScores.
FoldSummary fold_average(std::span<const double> scores);

}  // namespace aerovision
