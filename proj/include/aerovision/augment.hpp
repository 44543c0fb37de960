#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "aerovision/annotations.hpp"
#include "aerovision/imaging.hpp"
#include "aerovision/rng.hpp"

namespace aerovision {

struct PointF {
  double x = 0;
  double y = 0;
};

struct Size2D {
  std::size_t width = 0;
  std::size_t height = 0;
};

/// 2x3 matrix mapping source pixel coordinates to destination coordinates:
/// [x'; y'] = [[a, b, tx], [c, d, ty]] * [x; y; 1].
class AffineTransform {
 public:
  static constexpr double kMinAbsDet = 1e-9;

  AffineTransform() = default;
  /// Throws SingularTransform when |det| of the linear part is <= 1e-9.
  explicit AffineTransform(const std::array<double, 6>& m);

  static AffineTransform identity() { return AffineTransform({1, 0, 0, 0, 1, 0}); }
  static AffineTransform translation(double tx, double ty) { return AffineTransform({1, 0, tx, 0, 1, ty}); }
  static AffineTransform scaling(double sx, double sy) { return AffineTransform({sx, 0, 0, 0, sy, 0}); }

  PointF apply(PointF p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[2], m_[3] * p.x + m_[4] * p.y + m_[5]};
  }
  AffineTransform inverse() const;
  /// (this * other): applies `other` first.
  AffineTransform then_after(const AffineTransform& other) const;
  double determinant() const { return m_[0] * m_[4] - m_[1] * m_[3]; }
  const std::array<double, 6>& matrix() const { return m_; }

 private:
  std::array<double, 6> m_{1, 0, 0, 0, 1, 0};
};

/// Composition t2 after t1 (apply t1, then t2).
inline AffineTransform compose(const AffineTransform& t2, const AffineTransform& t1) {
  return t2.then_after(t1);
}

/// Rotation by `angle_deg` about `center`: (1,0) maps to (0,1) for +90 degrees
/// about the origin. In image coordinates (y pointing down) that is clockwise on
/// screen. Exact multiples of 90 degrees produce exact integer matrices.
AffineTransform make_rotation(double angle_deg, PointF center);

/// [[1, shx, 0], [shy, 1, 0]]; throws DegenerateShear when shx*shy == 1.
AffineTransform make_shear(double shx, double shy);

/// Box labels travel in normalized coordinates, masks pixel-for-pixel.
using SampleLabels = std::variant<std::monostate, std::vector<LabeledBox>, PixelMap>;

struct LabeledSample {
  Frame frame;
  SampleLabels labels;

  /// Throws DimensionMismatch when a mask's size differs from the frame's.
  void check() const;
};

struct AugmentOptions {
  /// Clipped boxes keeping less than this fraction of their transformed area are dropped.
  double min_visible_fraction = 0.2;
};

/// Pixel-space box (x_min, y_min, x_max, y_max).
struct PixelBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Axis-aligned bounding rectangle of the four transformed corners.
PixelBox transform_box(const PixelBox& box, const AffineTransform& t);

/// Clips to [0,w]x[0,h]; nullopt when the kept area is below
/// `min_visible_fraction` of the unclipped area.
std::optional<PixelBox> clip_box(const PixelBox& box, Size2D frame, double min_visible_fraction);

/// Nearest-neighbor warp. Destination pixel (u,v) samples the source pixel
/// containing t^-1(u + 0.5, v + 0.5); samples falling outside read as 0.
LabeledSample apply_affine(const LabeledSample& sample, const AffineTransform& t, Size2D out_size,
                           const AugmentOptions& options = {});

/// Every sample clamped to [0,255] after adding `delta`.
Frame brightness_shift(const Frame& frame, int delta);

/// Origin x is drawn first, then y, each uniform over the valid range with
/// rng.uniform_int. Throws CropTooLarge when out_size exceeds the frame.
LabeledSample random_crop(const LabeledSample& sample, Size2D out_size, CounterRng& rng,
                          const AugmentOptions& options = {});

/// Crop at a fixed origin; random_crop draws the origin and delegates here.
LabeledSample crop(const LabeledSample& sample, std::size_t x0, std::size_t y0, Size2D out_size,
                   const AugmentOptions& options = {});

/// Per-sample additive Gaussian noise, rounded half away from zero and clamped.
/// One rng.normal() call per sample in buffer order.
Frame add_noise(const Frame& frame, double sigma, CounterRng& rng);

}  // namespace aerovision
