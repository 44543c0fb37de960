#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aerovision/backend.hpp"
#include "aerovision/postprocess.hpp"

namespace aerovision {

/// Decoded result for one processed frame.
struct FrameRecord {
  std::uint64_t frame_id = 0;
  std::int64_t timestamp_us = 0;
  Task task = Task::Detection;
  std::vector<Detection> detections;     // Detection
  std::optional<PixelMap> mask;          // Segmentation
  std::optional<ActionResult> action;    // Action: set on frames that close a window
};

/// Row-major run-length encoding as (class_id, run_length) pairs.
std::vector<std::pair<std::uint8_t, std::size_t>> run_length_encode(const PixelMap& map);
PixelMap run_length_decode(const std::vector<std::pair<std::uint8_t, std::size_t>>& runs, std::size_t width,
                           std::size_t height, std::size_t num_classes);

/// One JSON object, no trailing newline. Masks are written inline as RLE, or
/// to `mask_dir/<frame_id>.png` and referenced by path when mask_dir is set.
std::string serialize_record(const FrameRecord& record, const std::filesystem::path& mask_dir = {});

/// Destination for newline-delimited records.
class LineSink {
 public:
  virtual ~LineSink() = default;
  /// Throws SinkFailure on unrecoverable errors.
  virtual void write_line(std::string_view line) = 0;
  virtual void flush() {}
};

class JsonlFileSink final : public LineSink {
 public:
  explicit JsonlFileSink(const std::filesystem::path& path);
  void write_line(std::string_view line) override;
  void flush() override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Collects lines in memory; for tests and embedding.
class MemorySink final : public LineSink {
 public:
  void write_line(std::string_view line) override;
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

class NullSink final : public LineSink {
 public:
  void write_line(std::string_view) override {}
};

struct TcpSinkStats {
  std::uint64_t sent = 0;
  std::uint64_t lost = 0;
  std::uint64_t connects = 0;
};

/// Newline-delimited records over TCP. Never blocks the caller on a dead peer:
/// while disconnected, records are counted as lost, and reconnects are
/// attempted no sooner than the current backoff (100 ms, doubling per failed
/// attempt, capped at 5 s; reset after a successful connect).
class TcpSink final : public LineSink {
 public:
  static constexpr std::chrono::milliseconds kInitialBackoff{100};
  static constexpr std::chrono::milliseconds kMaxBackoff{5000};

  TcpSink(std::string host, std::uint16_t port);
  ~TcpSink() override;
  TcpSink(const TcpSink&) = delete;
  TcpSink& operator=(const TcpSink&) = delete;

  void write_line(std::string_view line) override;

  bool connected() const { return fd_ >= 0; }
  TcpSinkStats stats() const { return stats_; }
  std::chrono::milliseconds current_backoff() const { return backoff_; }

 private:
  bool try_connect();
  void disconnect();
  bool peer_closed() const;

  std::string host_;
  std::uint16_t port_;
  int fd_ = -1;
  std::chrono::milliseconds backoff_ = kInitialBackoff;
  std::chrono::steady_clock::time_point next_attempt_{};
  TcpSinkStats stats_;
};

}  // namespace aerovision
