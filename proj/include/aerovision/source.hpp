#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aerovision/imaging.hpp"

namespace aerovision {

struct SourceSpec {
  enum class Kind { Directory, RawStream, Synthetic };

  Kind kind = Kind::Synthetic;
  std::filesystem::path path;   // Directory / RawStream
  std::optional<ChannelLayout> layout;  // inferred from files when absent
  double fps = 0;               // Synthetic rate; for files, 0 = as fast as possible
  std::size_t width = 64;       // Synthetic
  std::size_t height = 48;      // Synthetic
  std::optional<std::size_t> frame_count;  // Synthetic: stop after this many frames
  std::optional<double> duration_s;        // Synthetic: stop at this stream time
};

/// One element of a frame stream: a frame, or an error record describing an
/// input that could not be decoded (the stream continues after it).
struct SourceItem {
  std::optional<Frame> frame;
  std::string error;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next item, or nullopt when the stream is exhausted. Frames carry strictly
  /// increasing frame_id (from 0) and non-decreasing timestamp_us.
  virtual std::optional<SourceItem> next() = 0;
};

/// Throws MissingSource when a path does not exist.
std::unique_ptr<FrameSource> open_source(const SourceSpec& spec);

/// Files a directory source would visit: *.png, *.avrw and *.raw in lexicographic order.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

/// Deterministic test pattern for synthetic sources.
Frame synthetic_frame(std::size_t width, std::size_t height, const ChannelLayout& layout, std::uint64_t frame_id);

}  // namespace aerovision
