#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aerovision/backend.hpp"
#include "aerovision/bounded_queue.hpp"
#include "aerovision/metrics.hpp"
#include "aerovision/sink.hpp"
#include "aerovision/source.hpp"

namespace aerovision {

struct Thresholds {
  double confidence = 0.25;
  double nms_iou = 0.45;
  bool class_agnostic_nms = false;
};

struct ActionWindow {
  std::size_t length = 16;
  std::size_t stride = 8;
};

struct BackendSpec {
  std::string type = "mock";
  std::chrono::microseconds latency{0};
  std::vector<RawOutput> script;
  ChannelLayout input_layout = ChannelLayout::rgb();
};

struct SinkSpec {
  enum class Kind { Null, Jsonl, Tcp };
  Kind kind = Kind::Null;
  std::filesystem::path path;        // Jsonl
  std::filesystem::path mask_dir;    // Segmentation: write PNG masks here instead of inline RLE
  std::string host;                  // Tcp
  std::uint16_t port = 0;            // Tcp
};

struct PipelineConfig {
  SourceSpec source;
  Task task = Task::Detection;
  BackendSpec backend;
  std::size_t queue_capacity = 1;
  DropPolicy drop_policy = DropPolicy::DropOldest;
  SinkSpec sink;
  Thresholds thresholds;
  std::vector<std::string> vocabulary;
  std::vector<std::size_t> band_selection;  // for multispectral -> backend layout
  ActionWindow action_window;

  /// Throws InvalidArgument naming the offending field.
  void check() const;
};

struct RunLimit {
  std::optional<std::chrono::microseconds> duration;
  std::optional<std::size_t> max_frames;
};

struct StageQueueStats {
  std::string name;
  QueueStats stats;
};

struct TelemetrySummary {
  std::size_t ingested = 0;
  std::size_t processed = 0;
  std::size_t dropped = 0;
  std::size_t in_flight = 0;
  std::size_t source_errors = 0;
  /// Zeroed when fewer than two frames completed.
  FpsStats fps;
  std::vector<StageQueueStats> queues;
  std::optional<std::string> abort_reason;

  double drop_ratio() const { return ingested ? static_cast<double>(dropped) / static_cast<double>(ingested) : 0.0; }
  bool aborted() const { return abort_reason.has_value(); }
  std::string to_json() const;
};

/// Builds the backend a config names. Only "mock" is provided.
std::unique_ptr<InferenceBackend> make_backend(const BackendSpec& spec, Task task);
std::unique_ptr<LineSink> make_sink(const SinkSpec& spec);

/// Runs source -> preprocess -> backend -> postprocess -> sink, each stage on
/// its own thread, connected by bounded queues. The config's drop policy
/// governs the two frame queues ahead of the backend; result queues always
/// block so inferred frames are never discarded. Shutdown is an end marker
/// travelling downstream. Backend or sink failures stop the run early and are
/// reported through abort_reason with the telemetry gathered so far.
TelemetrySummary run_pipeline(const PipelineConfig& config, const RunLimit& limit = {});

/// Variant with caller-supplied components (tests, embedding).
TelemetrySummary run_pipeline(const PipelineConfig& config, FrameSource& source, InferenceBackend& backend,
                              LineSink& sink, const RunLimit& limit = {});

}  // namespace aerovision
