#include "aerovision/sink.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <json.hpp>

#include "aerovision/error.hpp"

namespace aerovision {

using nlohmann::json;

std::vector<std::pair<std::uint8_t, std::size_t>> run_length_encode(const PixelMap& map) {
  std::vector<std::pair<std::uint8_t, std::size_t>> runs;
  for (auto label : map.labels()) {
    if (!runs.empty() && runs.back().first == label) {
      ++runs.back().second;
    } else {
      runs.emplace_back(label, 1);
    }
  }
  return runs;
}

PixelMap run_length_decode(const std::vector<std::pair<std::uint8_t, std::size_t>>& runs, std::size_t width,
                           std::size_t height, std::size_t num_classes) {
  std::vector<std::uint8_t> labels;
  labels.reserve(width * height);
  for (const auto& [label, length] : runs) {
    if (labels.size() + length > width * height) {
      throw Error(ErrorCode::DimensionMismatch, "RLE runs exceed width*height");
    }
    labels.insert(labels.end(), length, label);
  }
  return PixelMap(width, height, num_classes, std::move(labels));
}

std::string serialize_record(const FrameRecord& record, const std::filesystem::path& mask_dir) {
  json j;
  j["frame_id"] = record.frame_id;
  j["timestamp_us"] = record.timestamp_us;
  j["task"] = std::string(to_string(record.task));
  switch (record.task) {
    case Task::Detection: {
      json dets = json::array();
      for (const auto& d : record.detections) {
        dets.push_back({{"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
                        {"class_id", d.class_id},
                        {"class_name", d.class_name},
                        {"confidence", d.confidence}});
      }
      j["detections"] = std::move(dets);
      break;
    }
    case Task::Segmentation:
      if (record.mask) {
        j["width"] = record.mask->width();
        j["height"] = record.mask->height();
        j["num_classes"] = record.mask->num_classes();
        if (!mask_dir.empty()) {
          const auto path = mask_dir / (std::to_string(record.frame_id) + ".png");
          save_mask(*record.mask, path);
          j["mask"] = path.string();
        } else {
          json runs = json::array();
          for (const auto& [label, length] : run_length_encode(*record.mask)) runs.push_back({label, length});
          j["rle"] = std::move(runs);
        }
      }
      break;
    case Task::Action:
      if (record.action) {
        j["action"] = {{"window", {record.action->start_frame, record.action->end_frame}},
                       {"class_id", record.action->class_id},
                       {"class_name", record.action->class_name()},
                       {"confidence", record.action->confidence}};
      } else {
        j["action"] = nullptr;
      }
      break;
  }
  return j.dump();
}

JsonlFileSink::JsonlFileSink(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::SinkFailure, "cannot open " + path.string());
}

void JsonlFileSink::write_line(std::string_view line) {
  out_ << line << '\n';
  if (!out_) throw Error(ErrorCode::SinkFailure, "write to " + path_.string() + " failed");
}

void JsonlFileSink::flush() {
  out_.flush();
  if (!out_) throw Error(ErrorCode::SinkFailure, "flush of " + path_.string() + " failed");
}

void MemorySink::write_line(std::string_view line) {
  std::lock_guard lock(mutex_);
  lines_.emplace_back(line);
}

std::vector<std::string> MemorySink::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

TcpSink::TcpSink(std::string host, std::uint16_t port) : host_(std::move(host)), port_(port) {
  if (!try_connect()) next_attempt_ = std::chrono::steady_clock::now() + backoff_;
}

TcpSink::~TcpSink() { disconnect(); }

bool TcpSink::try_connect() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &result) != 0) return false;
  for (auto* ai = result; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  freeaddrinfo(result);
  if (fd_ < 0) return false;
  ++stats_.connects;
  backoff_ = kInitialBackoff;
  return true;
}

void TcpSink::disconnect() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

bool TcpSink::peer_closed() const {
  char byte;
  const ssize_t n = ::recv(fd_, &byte, 1, MSG_PEEK | MSG_DONTWAIT);
  if (n == 0) return true;
  if (n < 0) return errno != EAGAIN && errno != EWOULDBLOCK;
  return false;
}

void TcpSink::write_line(std::string_view line) {
  const auto now = std::chrono::steady_clock::now();
  if (fd_ >= 0 && peer_closed()) {
    disconnect();
    next_attempt_ = now + backoff_;
  }
  if (fd_ < 0) {
    if (now < next_attempt_ || !try_connect()) {
      if (now >= next_attempt_) {
        backoff_ = std::min(backoff_ * 2, kMaxBackoff);
        next_attempt_ = now + backoff_;
      }
      ++stats_.lost;
      return;
    }
  }

  std::string payload(line);
  payload.push_back('\n');
  std::size_t offset = 0;
  while (offset < payload.size()) {
    const ssize_t n = ::send(fd_, payload.data() + offset, payload.size() - offset, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      disconnect();
      next_attempt_ = std::chrono::steady_clock::now() + backoff_;
      ++stats_.lost;
      return;
    }
    offset += static_cast<std::size_t>(n);
  }
  ++stats_.sent;
}

}  // namespace aerovision
