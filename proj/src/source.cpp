#include "aerovision/source.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "aerovision/error.hpp"

namespace aerovision {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - start).count();
}

// Paces file-backed sources when a rate is configured; otherwise stamps wall time.
class Pacer {
 public:
  explicit Pacer(double fps) : fps_(fps) {}

  std::int64_t stamp(std::uint64_t index) {
    if (!start_) start_ = Clock::now();
    if (fps_ <= 0) return micros_since(*start_);
    const auto at = static_cast<std::int64_t>(std::llround(static_cast<double>(index) * 1e6 / fps_));
    std::this_thread::sleep_until(*start_ + std::chrono::microseconds(at));
    return at;
  }

 private:
  double fps_;
  std::optional<Clock::time_point> start_;
};

class DirectorySource final : public FrameSource {
 public:
  DirectorySource(std::vector<std::filesystem::path> files, std::optional<ChannelLayout> layout, double fps)
      : files_(std::move(files)), layout_(layout), pacer_(fps) {}

  std::optional<SourceItem> next() override {
    if (cursor_ >= files_.size()) return std::nullopt;
    const auto& path = files_[cursor_++];
    try {
      Frame frame = layout_ ? load_frame(path, *layout_) : load_frame(path);
      frame.frame_id = next_id_;
      frame.timestamp_us = pacer_.stamp(next_id_);
      ++next_id_;
      return SourceItem{std::move(frame), {}};
    } catch (const Error& e) {
      return SourceItem{std::nullopt, path.string() + ": " + e.what()};
    }
  }

 private:
  std::vector<std::filesystem::path> files_;
  std::optional<ChannelLayout> layout_;
  Pacer pacer_;
  std::size_t cursor_ = 0;
  std::uint64_t next_id_ = 0;
};

class RawStreamSource final : public FrameSource {
 public:
  RawStreamSource(std::vector<std::uint8_t> bytes, std::optional<ChannelLayout> layout, double fps)
      : bytes_(std::move(bytes)), layout_(layout), pacer_(fps) {}

  std::optional<SourceItem> next() override {
    if (offset_ >= bytes_.size()) return std::nullopt;
    std::span<const std::uint8_t> rest(bytes_.data() + offset_, bytes_.size() - offset_);
    if (rest.size() < kRawHeaderSize) {
      offset_ = bytes_.size();
      return SourceItem{std::nullopt, "truncated NCHW-RAW header at byte " + std::to_string(bytes_.size() - rest.size())};
    }
    const std::size_t w = rest[4] | (rest[5] << 8);
    const std::size_t h = rest[6] | (rest[7] << 8);
    const std::size_t c = rest[8] | (rest[9] << 8);
    const std::size_t record = kRawHeaderSize + w * h * c;
    const ChannelLayout layout = layout_.value_or(c == 1   ? ChannelLayout::gray()
                                                  : c == 3 ? ChannelLayout::rgb()
                                                           : ChannelLayout::multispectral(static_cast<std::uint16_t>(c)));
    try {
      std::size_t consumed = 0;
      Frame frame = decode_raw(rest, layout, &consumed, false);
      offset_ += consumed;
      frame.frame_id = next_id_;
      frame.timestamp_us = pacer_.stamp(next_id_);
      ++next_id_;
      return SourceItem{std::move(frame), {}};
    } catch (const Error& e) {
      // Skip the record when its header is intact so later frames still decode.
      const bool header_ok = rest[0] == 'A' && rest[1] == 'V' && rest[2] == 'R' && rest[3] == 'W';
      offset_ = header_ok && record <= rest.size() ? offset_ + record : bytes_.size();
      return SourceItem{std::nullopt, e.what()};
    }
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::optional<ChannelLayout> layout_;
  Pacer pacer_;
  std::size_t offset_ = 0;
  std::uint64_t next_id_ = 0;
};

class SyntheticSource final : public FrameSource {
 public:
  explicit SyntheticSource(const SourceSpec& spec)
      : spec_(spec), layout_(spec.layout.value_or(ChannelLayout::rgb())) {}

  std::optional<SourceItem> next() override {
    if (spec_.frame_count && index_ >= *spec_.frame_count) return std::nullopt;
    const auto at_us = static_cast<std::int64_t>(std::llround(static_cast<double>(index_) * 1e6 / spec_.fps));
    if (spec_.duration_s && static_cast<double>(at_us) >= *spec_.duration_s * 1e6) return std::nullopt;
    if (!start_) start_ = Clock::now();
    std::this_thread::sleep_until(*start_ + std::chrono::microseconds(at_us));
    Frame frame = synthetic_frame(spec_.width, spec_.height, layout_, index_);
    frame.timestamp_us = at_us;
    ++index_;
    return SourceItem{std::move(frame), {}};
  }

 private:
  SourceSpec spec_;
  ChannelLayout layout_;
  std::optional<Clock::time_point> start_;
  std::uint64_t index_ = 0;
};

}  // namespace

std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".avrw" || ext == ".raw") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

Frame synthetic_frame(std::size_t width, std::size_t height, const ChannelLayout& layout, std::uint64_t frame_id) {
  Frame frame = Frame::blank(width, height, layout);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < frame.channels(); ++c) {
        frame.at(x, y, c) = static_cast<std::uint8_t>((x + 2 * y + 37 * c + 5 * frame_id) & 0xff);
      }
    }
  }
  frame.frame_id = frame_id;
  return frame;
}

std::unique_ptr<FrameSource> open_source(const SourceSpec& spec) {
  std::error_code ec;
  switch (spec.kind) {
    case SourceSpec::Kind::Directory:
      if (!std::filesystem::is_directory(spec.path, ec)) {
        throw Error(ErrorCode::MissingSource, "directory " + spec.path.string());
      }
      return std::make_unique<DirectorySource>(list_frame_files(spec.path), spec.layout, spec.fps);
    case SourceSpec::Kind::RawStream: {
      if (!std::filesystem::is_regular_file(spec.path, ec)) {
        throw Error(ErrorCode::MissingSource, "raw stream " + spec.path.string());
      }
      std::ifstream in(spec.path, std::ios::binary);
      std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      return std::make_unique<RawStreamSource>(std::move(bytes), spec.layout, spec.fps);
    }
    case SourceSpec::Kind::Synthetic:
      if (!(spec.fps > 0)) throw Error(ErrorCode::InvalidArgument, "synthetic source needs fps > 0");
      if (spec.width == 0 || spec.height == 0) throw Error(ErrorCode::InvalidArgument, "synthetic frame size is zero");
      return std::make_unique<SyntheticSource>(spec);
  }
  throw Error(ErrorCode::MissingSource, "unknown source kind");
}

}  // namespace aerovision
