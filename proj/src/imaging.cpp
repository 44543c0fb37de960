#include "aerovision/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "aerovision/error.hpp"

namespace aerovision {

namespace {

constexpr std::array<std::uint8_t, 4> kRawMagic = {'A', 'V', 'R', 'W'};
constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::MissingFile, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

struct DecodedPng {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

DecodedPng decode_png(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::MalformedImage, path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  if (alpha) {
    png_image_free(&image);
    throw Error(ErrorCode::MalformedImage, path.string() + ": alpha channel not supported");
  }
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  DecodedPng out;
  out.width = image.width;
  out.height = image.height;
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::MalformedImage, path.string() + ": " + image.message);
  }
  return out;
}

void encode_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                std::size_t channels, std::span<const std::uint8_t> pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, path.string() + ": " + image.message);
  }
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoFailure, path.string() + ": " + image.message);
  }
  buffer.resize(size);
  write_file(path, buffer);
}

bool has_prefix(std::span<const std::uint8_t> bytes, std::span<const std::uint8_t> magic) {
  return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
}

ChannelLayout infer_layout(std::size_t channels) {
  if (channels == 1) return ChannelLayout::gray();
  if (channels == 3) return ChannelLayout::rgb();
  return ChannelLayout::multispectral(static_cast<std::uint16_t>(channels));
}

// Mean of n samples rounded half away from zero (all samples are non-negative).
std::uint8_t rounded_mean(unsigned sum, unsigned n) {
  return static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
}

}  // namespace

ChannelLayout parse_layout(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "rgb") return ChannelLayout::rgb();
  if (lower == "gray" || lower == "grey") return ChannelLayout::gray();
  if (lower == "ir") return ChannelLayout::ir();
  std::string digits;
  if (lower.rfind("multispectral:", 0) == 0) digits = lower.substr(14);
  else if (lower.rfind("ms", 0) == 0) digits = lower.substr(2);
  if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
    const auto n = std::stoul(digits);
    if (n >= 1 && n <= 65535) return ChannelLayout::multispectral(static_cast<std::uint16_t>(n));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown channel layout '" + text + "'");
}

std::string to_string(const ChannelLayout& layout) {
  switch (layout.kind) {
    case ChannelLayout::Kind::RGB: return "rgb";
    case ChannelLayout::Kind::GRAY: return "gray";
    case ChannelLayout::Kind::IR: return "ir";
    case ChannelLayout::Kind::MULTISPECTRAL: return "ms" + std::to_string(layout.bands);
  }
  return "?";
}

Frame::Frame(std::size_t width, std::size_t height, ChannelLayout layout,
             std::vector<std::uint8_t> pixels, std::uint64_t frame_id_, std::int64_t timestamp_us_)
    : frame_id(frame_id_),
      timestamp_us(timestamp_us_),
      width_(width),
      height_(height),
      layout_(layout),
      pixels_(std::move(pixels)) {
  const bool fixed = layout.kind != ChannelLayout::Kind::MULTISPECTRAL;
  const std::size_t expected_bands = layout.kind == ChannelLayout::Kind::RGB ? 3 : 1;
  if (layout.bands == 0 || (fixed && layout.bands != expected_bands)) {
    throw Error(ErrorCode::MalformedImage, "layout " + to_string(layout) + " has inconsistent band count");
  }
  if (pixels_.size() != width * height * layout.channels()) {
    throw Error(ErrorCode::MalformedImage,
                "pixel buffer holds " + std::to_string(pixels_.size()) + " bytes, expected " +
                    std::to_string(width * height * layout.channels()));
  }
}

Frame Frame::blank(std::size_t width, std::size_t height, ChannelLayout layout) {
  return Frame(width, height, layout, std::vector<std::uint8_t>(width * height * layout.channels(), 0));
}

PixelMap::PixelMap(std::size_t width, std::size_t height, std::size_t num_classes,
                   std::vector<std::uint8_t> labels)
    : width_(width), height_(height), num_classes_(num_classes), labels_(std::move(labels)) {
  if (num_classes_ > 256) {
    throw Error(ErrorCode::ClassOverflow, std::to_string(num_classes_) + " classes exceed 8-bit labels");
  }
  if (labels_.size() != width * height) {
    throw Error(ErrorCode::DimensionMismatch, "label buffer size does not match width*height");
  }
  for (auto label : labels_) {
    if (label >= num_classes_) {
      throw Error(ErrorCode::ClassOverflow,
                  "label " + std::to_string(label) + " >= num_classes " + std::to_string(num_classes_));
    }
  }
}

PixelMap PixelMap::filled(std::size_t width, std::size_t height, std::size_t num_classes,
                          std::uint8_t label) {
  return PixelMap(width, height, num_classes, std::vector<std::uint8_t>(width * height, label));
}

void PixelMap::set(std::size_t x, std::size_t y, std::uint8_t label) {
  if (label >= num_classes_) {
    throw Error(ErrorCode::ClassOverflow, "label " + std::to_string(label) + " out of range");
  }
  labels_[y * width_ + x] = label;
}

std::vector<std::uint8_t> encode_raw(const Frame& frame) {
  if (frame.width() > 0xffff || frame.height() > 0xffff || frame.channels() > 0xffff) {
    throw Error(ErrorCode::IoFailure, "frame dimensions exceed NCHW-RAW u16 fields");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kRawHeaderSize + frame.pixels().size());
  out.insert(out.end(), kRawMagic.begin(), kRawMagic.end());
  put_u16(out, static_cast<std::uint16_t>(frame.width()));
  put_u16(out, static_cast<std::uint16_t>(frame.height()));
  put_u16(out, static_cast<std::uint16_t>(frame.channels()));
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(frame.frame_id));
  out.insert(out.end(), frame.pixels().begin(), frame.pixels().end());
  return out;
}

Frame decode_raw(std::span<const std::uint8_t> bytes, const ChannelLayout& layout,
                 std::size_t* consumed, bool exact) {
  if (bytes.size() < kRawHeaderSize || !has_prefix(bytes, kRawMagic)) {
    throw Error(ErrorCode::MalformedImage, "missing NCHW-RAW header");
  }
  const std::size_t width = get_u16(bytes.data() + 4);
  const std::size_t height = get_u16(bytes.data() + 6);
  const std::size_t channels = get_u16(bytes.data() + 8);
  const std::uint32_t frame_id = get_u32(bytes.data() + 12);
  if (channels != layout.channels()) {
    throw Error(ErrorCode::MalformedImage, "header declares " + std::to_string(channels) +
                                               " channels, layout " + to_string(layout) + " expects " +
                                               std::to_string(layout.channels()));
  }
  const std::size_t payload = width * height * channels;
  const std::size_t available = bytes.size() - kRawHeaderSize;
  if (available < payload || (exact && available != payload)) {
    throw Error(ErrorCode::MalformedImage, "payload holds " + std::to_string(available) +
                                               " bytes, header implies " + std::to_string(payload));
  }
  if (consumed) *consumed = kRawHeaderSize + payload;
  std::vector<std::uint8_t> pixels(bytes.begin() + kRawHeaderSize,
                                   bytes.begin() + static_cast<std::ptrdiff_t>(kRawHeaderSize + payload));
  return Frame(width, height, layout, std::move(pixels), frame_id);
}

Frame load_frame(const std::filesystem::path& path, const ChannelLayout& layout) {
  auto bytes = read_file(path);
  if (has_prefix(bytes, kRawMagic)) return decode_raw(bytes, layout);
  if (!has_prefix(bytes, kPngMagic)) {
    throw Error(ErrorCode::MalformedImage, path.string() + ": neither PNG nor NCHW-RAW");
  }
  auto png = decode_png(path);
  if (png.channels != layout.channels()) {
    throw Error(ErrorCode::MalformedImage, path.string() + ": PNG has " + std::to_string(png.channels) +
                                               " channels, layout " + to_string(layout) + " expects " +
                                               std::to_string(layout.channels()));
  }
  return Frame(png.width, png.height, layout, std::move(png.pixels));
}

Frame load_frame(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (has_prefix(bytes, kRawMagic) && bytes.size() >= kRawHeaderSize) {
    return decode_raw(bytes, infer_layout(get_u16(bytes.data() + 8)));
  }
  if (!has_prefix(bytes, kPngMagic)) {
    throw Error(ErrorCode::MalformedImage, path.string() + ": neither PNG nor NCHW-RAW");
  }
  auto png = decode_png(path);
  return Frame(png.width, png.height, infer_layout(png.channels), std::move(png.pixels));
}

void save_frame(const Frame& frame, const std::filesystem::path& path, bool force_raw) {
  if (!force_raw && (frame.channels() == 1 || frame.channels() == 3)) {
    encode_png(path, frame.width(), frame.height(), frame.channels(), frame.pixels());
  } else {
    write_file(path, encode_raw(frame));
  }
}

void save_mask(const PixelMap& map, const std::filesystem::path& path) {
  if (map.num_classes() > 256) {
    throw Error(ErrorCode::ClassOverflow, std::to_string(map.num_classes()) + " classes exceed 8-bit labels");
  }
  encode_png(path, map.width(), map.height(), 1, map.labels());
}

PixelMap load_mask(const std::filesystem::path& path, std::size_t num_classes) {
  if (num_classes > 256) {
    throw Error(ErrorCode::ClassOverflow, std::to_string(num_classes) + " classes exceed 8-bit labels");
  }
  auto png = decode_png(path);
  if (png.channels != 1) {
    throw Error(ErrorCode::MalformedImage, path.string() + ": mask must be single-channel");
  }
  return PixelMap(png.width, png.height, num_classes, std::move(png.pixels));
}

Frame convert_channels(const Frame& frame, const ChannelLayout& target,
                       std::span<const std::size_t> band_selection) {
  const std::size_t src_c = frame.channels();
  const std::size_t dst_c = target.channels();
  for (auto band : band_selection) {
    if (band >= src_c) {
      throw Error(ErrorCode::BandIndexOutOfRange,
                  "band " + std::to_string(band) + " of " + std::to_string(src_c) + "-channel frame");
    }
  }
  if (!band_selection.empty() && band_selection.size() != dst_c && dst_c != 1) {
    throw Error(ErrorCode::InvalidArgument, "band selection size must match target channel count");
  }

  // Resolve, per destination channel, the source bands it averages over.
  std::vector<std::vector<std::size_t>> sources(dst_c);
  if (!band_selection.empty()) {
    if (dst_c == 1) {
      sources[0].assign(band_selection.begin(), band_selection.end());
    } else {
      for (std::size_t c = 0; c < dst_c; ++c) sources[c] = {band_selection[c]};
    }
  } else if (src_c == dst_c) {
    for (std::size_t c = 0; c < dst_c; ++c) sources[c] = {c};
  } else if (dst_c == 1) {
    for (std::size_t c = 0; c < src_c; ++c) sources[0].push_back(c);
  } else if (src_c == 1) {
    for (std::size_t c = 0; c < dst_c; ++c) sources[c] = {0};
  } else if (src_c > dst_c) {
    for (std::size_t c = 0; c < dst_c; ++c) sources[c] = {c};
  } else {
    throw Error(ErrorCode::BandIndexOutOfRange, "cannot widen " + to_string(frame.layout()) + " to " +
                                                    to_string(target) + " without a band selection");
  }

  std::vector<std::uint8_t> out(frame.width() * frame.height() * dst_c);
  const auto in = frame.pixels();
  const std::size_t pixel_count = frame.width() * frame.height();
  for (std::size_t i = 0; i < pixel_count; ++i) {
    const std::uint8_t* px = in.data() + i * src_c;
    for (std::size_t c = 0; c < dst_c; ++c) {
      const auto& bands = sources[c];
      if (bands.size() == 1) {
        out[i * dst_c + c] = px[bands[0]];
      } else {
        unsigned sum = 0;
        for (auto b : bands) sum += px[b];
        out[i * dst_c + c] = rounded_mean(sum, static_cast<unsigned>(bands.size()));
      }
    }
  }
  return Frame(frame.width(), frame.height(), target, std::move(out), frame.frame_id, frame.timestamp_us);
}

}  // namespace aerovision
