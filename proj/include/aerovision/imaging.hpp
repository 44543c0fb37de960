#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aerovision {

/// Channel layout of a frame. MULTISPECTRAL carries its own band count.
struct ChannelLayout {
  enum class Kind { RGB, GRAY, IR, MULTISPECTRAL };

  Kind kind = Kind::RGB;
  std::uint16_t bands = 3;

  static ChannelLayout rgb() { return {Kind::RGB, 3}; }
  static ChannelLayout gray() { return {Kind::GRAY, 1}; }
  static ChannelLayout ir() { return {Kind::IR, 1}; }
  static ChannelLayout multispectral(std::uint16_t n) { return {Kind::MULTISPECTRAL, n}; }

  std::size_t channels() const { return bands; }

  friend bool operator==(const ChannelLayout&, const ChannelLayout&) = default;
};

/// Parses "rgb", "gray", "ir" or "ms<N>" / "multispectral:<N>".
ChannelLayout parse_layout(const std::string& text);
std::string to_string(const ChannelLayout& layout);

/// 8-bit, row-major, channel-interleaved image.
class Frame {
 public:
  Frame() = default;
  Frame(std::size_t width, std::size_t height, ChannelLayout layout,
        std::vector<std::uint8_t> pixels, std::uint64_t frame_id = 0,
        std::int64_t timestamp_us = 0);

  /// Zero-filled frame.
  static Frame blank(std::size_t width, std::size_t height, ChannelLayout layout);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return layout_.channels(); }
  const ChannelLayout& layout() const { return layout_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> mutable_pixels() { return pixels_; }

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels() + c];
  }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels_[(y * width_ + x) * channels() + c];
  }

  std::uint64_t frame_id = 0;
  std::int64_t timestamp_us = 0;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  ChannelLayout layout_;
  std::vector<std::uint8_t> pixels_;
};

/// Per-pixel class labels.
class PixelMap {
 public:
  PixelMap() = default;
  PixelMap(std::size_t width, std::size_t height, std::size_t num_classes,
           std::vector<std::uint8_t> labels);

  static PixelMap filled(std::size_t width, std::size_t height, std::size_t num_classes,
                         std::uint8_t label = 0);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t num_classes() const { return num_classes_; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  std::uint8_t at(std::size_t x, std::size_t y) const { return labels_[y * width_ + x]; }
  void set(std::size_t x, std::size_t y, std::uint8_t label);

  friend bool operator==(const PixelMap&, const PixelMap&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<std::uint8_t> labels_;
};

// NCHW-RAW v1 container: 16-byte little-endian header
// {"AVRW", u16 width, u16 height, u16 channels, u16 reserved, u32 frame_id}
// followed by width*height*channels channel-interleaved bytes.
inline constexpr std::size_t kRawHeaderSize = 16;

std::vector<std::uint8_t> encode_raw(const Frame& frame);
/// Decodes one container starting at `bytes`; `consumed` receives header+payload size.
Frame decode_raw(std::span<const std::uint8_t> bytes, const ChannelLayout& layout,
                 std::size_t* consumed = nullptr, bool exact = true);

/// Loads a PNG (1 or 3 channels, 8-bit) or an NCHW-RAW file, detected by magic bytes.
Frame load_frame(const std::filesystem::path& path, const ChannelLayout& layout);
/// Infers the layout from the file (PNG 1ch -> GRAY, 3ch -> RGB; RAW 1/3/n).
Frame load_frame(const std::filesystem::path& path);

/// PNG for 1- and 3-channel layouts, NCHW-RAW otherwise (or when `force_raw`).
void save_frame(const Frame& frame, const std::filesystem::path& path, bool force_raw = false);

/// Masks are stored as 8-bit single-channel PNG. The class count is not
/// part of the file, so load_mask takes it as an argument.
void save_mask(const PixelMap& map, const std::filesystem::path& path);
PixelMap load_mask(const std::filesystem::path& path, std::size_t num_classes);

/// Channel adapter. GRAY from several channels is the mean, rounded half away
/// from zero; GRAY to RGB replicates; `band_selection` picks source bands in
/// target order when given.
Frame convert_channels(const Frame& frame, const ChannelLayout& target,
                       std::span<const std::size_t> band_selection = {});

}  // namespace aerovision
