#include "aerovision/pipeline.hpp"

#include <deque>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "aerovision/error.hpp"

namespace aerovision {

namespace {

using Clock = std::chrono::steady_clock;

struct FrameMessage {
  Frame frame;
  std::int64_t ingest_us = 0;
};

struct InferredMessage {
  std::uint64_t frame_id = 0;
  std::int64_t timestamp_us = 0;
  std::int64_t ingest_us = 0;
  RawOutput output;
};

struct RecordMessage {
  FrameRecord record;
  std::int64_t ingest_us = 0;
};

// nullopt is the end-of-stream marker.
template <typename T>
using StageQueue = BoundedQueue<std::optional<T>>;

// First failure wins; later stages failing as a consequence are ignored.
class AbortSlot {
 public:
  void set(const std::string& reason) {
    std::lock_guard lock(mutex_);
    if (!reason_) reason_ = reason;
  }
  std::optional<std::string> get() const {
    std::lock_guard lock(mutex_);
    return reason_;
  }

 private:
  mutable std::mutex mutex_;
  std::optional<std::string> reason_;
};

std::int64_t micros_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
}

FrameRecord decode_output(const PipelineConfig& config, const InferredMessage& msg,
                          std::deque<std::pair<std::uint64_t, ActionScores>>& window) {
  FrameRecord record;
  record.frame_id = msg.frame_id;
  record.timestamp_us = msg.timestamp_us;
  record.task = config.task;
  switch (config.task) {
    case Task::Detection: {
      const auto& tensor = std::get<GridTensor>(msg.output);
      const auto all = decode_grid(tensor, config.vocabulary);
      const auto confident = confidence_filter(all, config.thresholds.confidence);
      record.detections = nms(confident, config.thresholds.nms_iou, config.thresholds.class_agnostic_nms);
      break;
    }
    case Task::Segmentation: {
      const auto& logits = std::get<SegmentationLogits>(msg.output);
      record.mask = decode_segmentation(logits.scores, logits.width, logits.height, logits.num_classes);
      break;
    }
    case Task::Action: {
      window.emplace_back(msg.frame_id, std::get<ActionScores>(msg.output));
      if (window.size() >= config.action_window.length) {
        std::vector<ActionScores> scores;
        scores.reserve(window.size());
        for (const auto& [id, s] : window) scores.push_back(s);
        const auto decision = decode_action(scores);
        record.action = ActionResult{window.front().first, window.back().first, decision.class_id,
                                     decision.confidence};
        for (std::size_t i = 0; i < config.action_window.stride && !window.empty(); ++i) window.pop_front();
      }
      break;
    }
  }
  return record;
}

}  // namespace

void PipelineConfig::check() const {
  if (queue_capacity < 1) throw Error(ErrorCode::InvalidArgument, "/queue_capacity: must be >= 1");
  if (thresholds.confidence < 0 || thresholds.confidence > 1) {
    throw Error(ErrorCode::InvalidArgument, "/thresholds/confidence: must lie in [0,1]");
  }
  if (thresholds.nms_iou < 0 || thresholds.nms_iou > 1) {
    throw Error(ErrorCode::InvalidArgument, "/thresholds/nms: must lie in [0,1]");
  }
  if (task == Task::Action) {
    if (action_window.length < 2) throw Error(ErrorCode::InvalidArgument, "/action_window/length: must be >= 2");
    if (action_window.stride < 1) throw Error(ErrorCode::InvalidArgument, "/action_window/stride: must be >= 1");
  }
  if (sink.kind == SinkSpec::Kind::Jsonl && sink.path.empty()) {
    throw Error(ErrorCode::InvalidArgument, "/sink/path: required for jsonl sinks");
  }
  if (sink.kind == SinkSpec::Kind::Tcp && (sink.host.empty() || sink.port == 0)) {
    throw Error(ErrorCode::InvalidArgument, "/sink: tcp sinks need host and port");
  }
}

std::string TelemetrySummary::to_json() const {
  nlohmann::json j;
  j["ingested"] = ingested;
  j["processed"] = processed;
  j["dropped"] = dropped;
  j["in_flight"] = in_flight;
  j["source_errors"] = source_errors;
  j["drop_ratio"] = drop_ratio();
  j["fps"] = {{"frame_count", fps.frame_count},
              {"duration_s", fps.duration_s},
              {"mean_fps", fps.mean_fps},
              {"p50_latency_us", fps.p50_latency_us},
              {"p95_latency_us", fps.p95_latency_us}};
  j["queues"] = nlohmann::json::array();
  for (const auto& q : queues) {
    j["queues"].push_back({{"name", q.name},
                           {"capacity", q.stats.capacity},
                           {"high_water", q.stats.high_water},
                           {"full_events", q.stats.full_events},
                           {"dropped", q.stats.dropped}});
  }
  j["aborted"] = aborted();
  if (abort_reason) j["abort_reason"] = *abort_reason;
  return j.dump(2);
}

std::unique_ptr<InferenceBackend> make_backend(const BackendSpec& spec, Task task) {
  if (spec.type != "mock") throw Error(ErrorCode::InvalidArgument, "/backend/type: unknown backend '" + spec.type + "'");
  return std::make_unique<MockBackend>(task, spec.latency, spec.script, spec.input_layout);
}

std::unique_ptr<LineSink> make_sink(const SinkSpec& spec) {
  switch (spec.kind) {
    case SinkSpec::Kind::Null: return std::make_unique<NullSink>();
    case SinkSpec::Kind::Jsonl: return std::make_unique<JsonlFileSink>(spec.path);
    case SinkSpec::Kind::Tcp: return std::make_unique<TcpSink>(spec.host, spec.port);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown sink kind");
}

TelemetrySummary run_pipeline(const PipelineConfig& config, const RunLimit& limit) {
  config.check();
  auto source = open_source(config.source);
  auto backend = make_backend(config.backend, config.task);
  auto sink = make_sink(config.sink);
  if (!config.sink.mask_dir.empty()) std::filesystem::create_directories(config.sink.mask_dir);
  return run_pipeline(config, *source, *backend, *sink, limit);
}

TelemetrySummary run_pipeline(const PipelineConfig& config, FrameSource& source, InferenceBackend& backend,
                              LineSink& sink, const RunLimit& limit) {
  config.check();
  if (backend.task() != config.task) {
    throw Error(ErrorCode::InvalidArgument, "backend task differs from configured task");
  }

  StageQueue<FrameMessage> ingest_q(config.queue_capacity, config.drop_policy);
  StageQueue<FrameMessage> infer_q(config.queue_capacity, config.drop_policy);
  StageQueue<InferredMessage> post_q(config.queue_capacity, DropPolicy::Block);
  StageQueue<RecordMessage> sink_q(config.queue_capacity, DropPolicy::Block);

  AbortSlot abort;
  const auto start = Clock::now();
  const ChannelLayout target_layout = backend.input_layout();

  // Per-stage counters, read only after the threads are joined.
  std::size_t ingested = 0;
  std::size_t source_errors = 0;
  std::vector<std::int64_t> done_us;
  std::vector<double> latencies_us;

  {
    std::jthread source_stage([&] {
      while (true) {
        if (limit.max_frames && ingested >= *limit.max_frames) break;
        if (limit.duration && Clock::now() - start >= *limit.duration) break;
        auto item = source.next();
        if (!item) break;
        if (!item->frame) {
          ++source_errors;
          std::cerr << "source: " << item->error << '\n';
          continue;
        }
        ++ingested;
        if (ingest_q.push(FrameMessage{std::move(*item->frame), micros_since(start)}) ==
            StageQueue<FrameMessage>::PushResult::Closed) {
          return;
        }
      }
      ingest_q.push_blocking(std::nullopt);
    });

    std::jthread preprocess_stage([&] {
      while (auto msg = ingest_q.pop()) {
        if (!*msg) break;
        auto& fm = **msg;
        try {
          if (!(fm.frame.layout() == target_layout)) {
            fm.frame = convert_channels(fm.frame, target_layout, config.band_selection);
          }
        } catch (const Error& e) {
          abort.set(std::string("preprocess: ") + e.what());
          ingest_q.close();
          infer_q.push_blocking(std::nullopt);
          return;
        }
        if (infer_q.push(std::move(*msg)) == StageQueue<FrameMessage>::PushResult::Closed) {
          ingest_q.close();
          return;
        }
      }
      infer_q.push_blocking(std::nullopt);
    });

    std::jthread backend_stage([&] {
      while (auto msg = infer_q.pop()) {
        if (!*msg) break;
        auto& fm = **msg;
        InferredMessage out{fm.frame.frame_id, fm.frame.timestamp_us, fm.ingest_us, {}};
        try {
          out.output = backend.infer(fm.frame);
        } catch (const std::exception& e) {
          abort.set(std::string("backend: ") + e.what());
          infer_q.close();
          post_q.push_blocking(std::nullopt);
          return;
        }
        if (post_q.push(std::move(out)) == StageQueue<InferredMessage>::PushResult::Closed) {
          infer_q.close();
          return;
        }
      }
      post_q.push_blocking(std::nullopt);
    });

    std::jthread postprocess_stage([&] {
      std::deque<std::pair<std::uint64_t, ActionScores>> window;
      while (auto msg = post_q.pop()) {
        if (!*msg) break;
        RecordMessage out;
        try {
          out = RecordMessage{decode_output(config, **msg, window), (*msg)->ingest_us};
        } catch (const std::exception& e) {
          abort.set(std::string("postprocess: ") + e.what());
          post_q.close();
          sink_q.push_blocking(std::nullopt);
          return;
        }
        if (sink_q.push(std::move(out)) == StageQueue<RecordMessage>::PushResult::Closed) {
          post_q.close();
          return;
        }
      }
      sink_q.push_blocking(std::nullopt);
    });

    std::jthread sink_stage([&] {
      try {
        while (auto msg = sink_q.pop()) {
          if (!*msg) break;
          sink.write_line(serialize_record((*msg)->record, config.sink.mask_dir));
          const auto now = micros_since(start);
          done_us.push_back(now);
          latencies_us.push_back(static_cast<double>(now - (*msg)->ingest_us));
        }
        sink.flush();
      } catch (const std::exception& e) {
        abort.set(std::string("sink: ") + e.what());
        sink_q.close();
      }
    });
  }

  TelemetrySummary summary;
  summary.ingested = ingested;
  summary.processed = done_us.size();
  summary.source_errors = source_errors;
  summary.queues = {{"ingest", ingest_q.stats()},
                    {"infer", infer_q.stats()},
                    {"postprocess", post_q.stats()},
                    {"sink", sink_q.stats()}};
  for (const auto& q : summary.queues) summary.dropped += q.stats.dropped;
  summary.in_flight = summary.ingested - summary.processed - summary.dropped;
  if (done_us.size() >= 2) {
    // Completions closer than the clock resolution are nudged apart by 1 us.
    for (std::size_t i = 1; i < done_us.size(); ++i) done_us[i] = std::max(done_us[i], done_us[i - 1] + 1);
    summary.fps = fps_stats(done_us, latencies_us);
  } else {
    summary.fps.frame_count = done_us.size();
  }
  summary.abort_reason = abort.get();
  return summary;
}

}  // namespace aerovision
