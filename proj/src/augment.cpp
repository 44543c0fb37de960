#include "aerovision/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aerovision/error.hpp"

namespace aerovision {

namespace {

PixelBox to_pixels(const BoundingBox& b, std::size_t w, std::size_t h) {
  const auto fw = static_cast<double>(w);
  const auto fh = static_cast<double>(h);
  return {b.x_min * fw, b.y_min * fh, b.x_max * fw, b.y_max * fh};
}

BoundingBox to_normalized(const PixelBox& b, std::size_t w, std::size_t h) {
  const auto fw = static_cast<double>(w);
  const auto fh = static_cast<double>(h);
  return {b.x_min / fw, b.y_min / fh, b.x_max / fw, b.y_max / fh};
}

// Source pixel index for destination pixel (u, v), or nullopt outside the source.
struct Sampler {
  AffineTransform inverse;
  std::size_t src_w;
  std::size_t src_h;

  std::optional<std::pair<std::size_t, std::size_t>> operator()(std::size_t u, std::size_t v) const {
    const PointF p = inverse.apply({static_cast<double>(u) + 0.5, static_cast<double>(v) + 0.5});
    const double fx = std::floor(p.x);
    const double fy = std::floor(p.y);
    if (fx < 0 || fy < 0 || fx >= static_cast<double>(src_w) || fy >= static_cast<double>(src_h)) {
      return std::nullopt;
    }
    return std::pair{static_cast<std::size_t>(fx), static_cast<std::size_t>(fy)};
  }
};

std::vector<LabeledBox> map_boxes(const std::vector<LabeledBox>& boxes, Size2D in, Size2D out,
                                  const auto& pixel_transform, double min_visible) {
  std::vector<LabeledBox> result;
  for (const auto& lb : boxes) {
    const PixelBox moved = pixel_transform(to_pixels(lb.box, in.width, in.height));
    if (auto clipped = clip_box(moved, out, min_visible)) {
      result.push_back({to_normalized(*clipped, out.width, out.height), lb.class_id});
    }
  }
  return result;
}

}  // namespace

AffineTransform::AffineTransform(const std::array<double, 6>& m) : m_(m) {
  if (!(std::abs(determinant()) > kMinAbsDet)) {
    throw Error(ErrorCode::SingularTransform, "affine determinant " + std::to_string(determinant()));
  }
}

AffineTransform AffineTransform::inverse() const {
  const double det = determinant();
  const double a = m_[4] / det;
  const double b = -m_[1] / det;
  const double c = -m_[3] / det;
  const double d = m_[0] / det;
  return AffineTransform({a, b, -(a * m_[2] + b * m_[5]), c, d, -(c * m_[2] + d * m_[5])});
}

AffineTransform AffineTransform::then_after(const AffineTransform& o) const {
  const auto& p = m_;
  const auto& q = o.m_;
  return AffineTransform({p[0] * q[0] + p[1] * q[3], p[0] * q[1] + p[1] * q[4], p[0] * q[2] + p[1] * q[5] + p[2],
                          p[3] * q[0] + p[4] * q[3], p[3] * q[1] + p[4] * q[4], p[3] * q[2] + p[4] * q[5] + p[5]});
}

AffineTransform make_rotation(double angle_deg, PointF center) {
  double cos_a;
  double sin_a;
  const double turns = angle_deg / 90.0;
  if (turns == std::round(turns)) {
    // Exact quarter turns; std::cos(pi/2) is not exactly zero.
    static constexpr double kCos[4] = {1, 0, -1, 0};
    static constexpr double kSin[4] = {0, 1, 0, -1};
    const auto q = static_cast<int>(((static_cast<long long>(turns) % 4) + 4) % 4);
    cos_a = kCos[q];
    sin_a = kSin[q];
  } else {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    cos_a = std::cos(rad);
    sin_a = std::sin(rad);
  }
  // p' = R (p - c) + c
  return AffineTransform({cos_a, -sin_a, center.x - cos_a * center.x + sin_a * center.y,
                          sin_a, cos_a, center.y - sin_a * center.x - cos_a * center.y});
}

AffineTransform make_shear(double shx, double shy) {
  if (shx * shy == 1.0 || std::abs(1.0 - shx * shy) <= AffineTransform::kMinAbsDet) {
    throw Error(ErrorCode::DegenerateShear, "shx*shy == 1");
  }
  return AffineTransform({1, shx, 0, shy, 1, 0});
}

void LabeledSample::check() const {
  if (const auto* map = std::get_if<PixelMap>(&labels)) {
    if (map->width() != frame.width() || map->height() != frame.height()) {
      throw Error(ErrorCode::DimensionMismatch, "mask size differs from frame size");
    }
  }
}

PixelBox transform_box(const PixelBox& box, const AffineTransform& t) {
  const PointF corners[4] = {{box.x_min, box.y_min}, {box.x_max, box.y_min},
                             {box.x_min, box.y_max}, {box.x_max, box.y_max}};
  PixelBox out{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& c : corners) {
    const PointF p = t.apply(c);
    out.x_min = std::min(out.x_min, p.x);
    out.y_min = std::min(out.y_min, p.y);
    out.x_max = std::max(out.x_max, p.x);
    out.y_max = std::max(out.y_max, p.y);
  }
  return out;
}

std::optional<PixelBox> clip_box(const PixelBox& box, Size2D frame, double min_visible_fraction) {
  const double full = box.area();
  PixelBox c{std::clamp(box.x_min, 0.0, static_cast<double>(frame.width)),
             std::clamp(box.y_min, 0.0, static_cast<double>(frame.height)),
             std::clamp(box.x_max, 0.0, static_cast<double>(frame.width)),
             std::clamp(box.y_max, 0.0, static_cast<double>(frame.height))};
  if (!(c.x_max > c.x_min && c.y_max > c.y_min)) return std::nullopt;
  if (full <= 0.0 || c.area() < min_visible_fraction * full) return std::nullopt;
  return c;
}

LabeledSample apply_affine(const LabeledSample& sample, const AffineTransform& t, Size2D out_size,
                           const AugmentOptions& options) {
  sample.check();
  const auto& src = sample.frame;
  const Sampler sampler{t.inverse(), src.width(), src.height()};
  const std::size_t channels = src.channels();

  Frame frame = Frame::blank(out_size.width, out_size.height, src.layout());
  frame.frame_id = src.frame_id;
  frame.timestamp_us = src.timestamp_us;
  const auto* map = std::get_if<PixelMap>(&sample.labels);
  std::vector<std::uint8_t> labels;
  if (map) labels.assign(out_size.width * out_size.height, 0);

  for (std::size_t v = 0; v < out_size.height; ++v) {
    for (std::size_t u = 0; u < out_size.width; ++u) {
      const auto hit = sampler(u, v);
      if (!hit) continue;
      for (std::size_t c = 0; c < channels; ++c) frame.at(u, v, c) = src.at(hit->first, hit->second, c);
      if (map) labels[v * out_size.width + u] = map->at(hit->first, hit->second);
    }
  }

  LabeledSample out{std::move(frame), std::monostate{}};
  if (map) {
    out.labels = PixelMap(out_size.width, out_size.height, map->num_classes(), std::move(labels));
  } else if (const auto* boxes = std::get_if<std::vector<LabeledBox>>(&sample.labels)) {
    out.labels = map_boxes(*boxes, {src.width(), src.height()}, out_size,
                           [&](const PixelBox& b) { return transform_box(b, t); },
                           options.min_visible_fraction);
  }
  return out;
}

Frame brightness_shift(const Frame& frame, int delta) {
  Frame out = frame;
  for (auto& s : out.mutable_pixels()) s = static_cast<std::uint8_t>(std::clamp(int{s} + delta, 0, 255));
  return out;
}

LabeledSample crop(const LabeledSample& sample, std::size_t x0, std::size_t y0, Size2D out_size,
                   const AugmentOptions& options) {
  sample.check();
  const auto& src = sample.frame;
  if (out_size.width == 0 || out_size.height == 0 || x0 + out_size.width > src.width() ||
      y0 + out_size.height > src.height()) {
    throw Error(ErrorCode::CropTooLarge, "crop window exceeds the frame");
  }
  const std::size_t channels = src.channels();
  std::vector<std::uint8_t> pixels;
  pixels.reserve(out_size.width * out_size.height * channels);
  const auto in = src.pixels();
  for (std::size_t y = 0; y < out_size.height; ++y) {
    const auto* row = in.data() + ((y0 + y) * src.width() + x0) * channels;
    pixels.insert(pixels.end(), row, row + out_size.width * channels);
  }
  LabeledSample out{Frame(out_size.width, out_size.height, src.layout(), std::move(pixels), src.frame_id,
                          src.timestamp_us),
                    std::monostate{}};

  if (const auto* map = std::get_if<PixelMap>(&sample.labels)) {
    std::vector<std::uint8_t> labels;
    labels.reserve(out_size.width * out_size.height);
    for (std::size_t y = 0; y < out_size.height; ++y) {
      for (std::size_t x = 0; x < out_size.width; ++x) labels.push_back(map->at(x0 + x, y0 + y));
    }
    out.labels = PixelMap(out_size.width, out_size.height, map->num_classes(), std::move(labels));
  } else if (const auto* boxes = std::get_if<std::vector<LabeledBox>>(&sample.labels)) {
    const auto dx = static_cast<double>(x0);
    const auto dy = static_cast<double>(y0);
    out.labels = map_boxes(*boxes, {src.width(), src.height()}, out_size,
                           [&](const PixelBox& b) {
                             return PixelBox{b.x_min - dx, b.y_min - dy, b.x_max - dx, b.y_max - dy};
                           },
                           options.min_visible_fraction);
  }
  return out;
}

LabeledSample random_crop(const LabeledSample& sample, Size2D out_size, CounterRng& rng,
                          const AugmentOptions& options) {
  const auto& src = sample.frame;
  if (out_size.width == 0 || out_size.height == 0 || out_size.width > src.width() ||
      out_size.height > src.height()) {
    throw Error(ErrorCode::CropTooLarge, std::to_string(out_size.width) + "x" + std::to_string(out_size.height) +
                                             " crop of " + std::to_string(src.width()) + "x" +
                                             std::to_string(src.height()) + " frame");
  }
  const std::size_t x0 = rng.uniform_int(0, src.width() - out_size.width);
  const std::size_t y0 = rng.uniform_int(0, src.height() - out_size.height);
  return crop(sample, x0, y0, out_size, options);
}

Frame add_noise(const Frame& frame, double sigma, CounterRng& rng) {
  if (sigma < 0) throw Error(ErrorCode::InvalidArgument, "sigma must be non-negative");
  Frame out = frame;
  if (sigma == 0) return out;
  for (auto& s : out.mutable_pixels()) {
    const double v = std::round(static_cast<double>(s) + sigma * rng.normal());
    s = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

}  // namespace aerovision
