#include <gtest/gtest.h>

#include <cmath>

#include "aerovision/augment.hpp"
#include "aerovision/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace aerovision {
namespace {

Frame gradient(std::size_t w, std::size_t h, ChannelLayout layout = ChannelLayout::rgb()) {
  Frame f = Frame::blank(w, h, layout);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < f.channels(); ++c) f.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c) & 0xff);
  return f;
}

void expect_matrix_near(const AffineTransform& t, const std::array<double, 6>& m, double tol) {
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(t.matrix()[i], m[i], tol) << "entry " << i;
}

TEST(Rotation, ZeroAndFullTurnAreIdentity) {
  expect_matrix_near(make_rotation(0, {3, 4}), {1, 0, 0, 0, 1, 0}, 0.0);
  expect_matrix_near(make_rotation(360, {3, 4}), {1, 0, 0, 0, 1, 0}, 1e-9);
  expect_matrix_near(make_rotation(359.9999999999, {3, 4}), {1, 0, 0, 0, 1, 0}, 1e-9);
}

TEST(Rotation, QuarterTurnAboutOrigin) {
  const PointF p = make_rotation(90, {0, 0}).apply({1, 0});
  EXPECT_EQ(p.x, 0.0);
  EXPECT_EQ(p.y, 1.0);
}

TEST(Shear, MatrixAndDegenerateCase) {
  expect_matrix_near(make_shear(0, 0), {1, 0, 0, 0, 1, 0}, 0.0);
  const PointF p = make_shear(0.5, 0).apply({2, 2});
  EXPECT_EQ(p.x, 3.0);
  EXPECT_EQ(p.y, 2.0);
  expect_error(ErrorCode::DegenerateShear, [] { make_shear(1, 1); });
  expect_error(ErrorCode::SingularTransform, [] { AffineTransform({1, 2, 0, 2, 4, 0}); });
}

TEST(ApplyAffine, IdentityLeavesSampleUnchanged) {
  const Frame f = gradient(9, 7);
  const std::vector<LabeledBox> boxes = {{{0.1, 0.2, 0.5, 0.6}, 1}};
  const auto out = apply_affine({f, boxes}, AffineTransform::identity(), {9, 7});
  EXPECT_EQ(out.frame, f);
  EXPECT_EQ(std::get<std::vector<LabeledBox>>(out.labels), boxes);

  const PixelMap m(9, 7, 3, std::vector<std::uint8_t>(63, 2));
  const auto masked = apply_affine({f, m}, AffineTransform::identity(), {9, 7});
  EXPECT_EQ(std::get<PixelMap>(masked.labels), m);
}

TEST(ApplyAffine, QuarterTurnBoxExample) {
  const auto t = make_rotation(90, {50, 50});
  // Corner oracle: (x, y) -> (100 - y, x), bounding rectangle of the four images.
  const double xs[] = {10, 30}, ys[] = {20, 40};
  double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
  for (double x : xs)
    for (double y : ys) {
      x0 = std::min(x0, 100 - y), x1 = std::max(x1, 100 - y);
      y0 = std::min(y0, x), y1 = std::max(y1, x);
    }
  EXPECT_EQ((PixelBox{x0, y0, x1, y1}), (PixelBox{60, 10, 80, 30}));
  EXPECT_EQ(transform_box({10, 20, 30, 40}, t), (PixelBox{60, 10, 80, 30}));

  const auto out = apply_affine({Frame::blank(100, 100, ChannelLayout::rgb()), std::vector<LabeledBox>{{{0.1, 0.2, 0.3, 0.4}, 0}}},
                                t, {100, 100});
  const auto& boxes = std::get<std::vector<LabeledBox>>(out.labels);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_NEAR(boxes[0].box.x_min, 0.6, 1e-12);
  EXPECT_NEAR(boxes[0].box.y_min, 0.1, 1e-12);
  EXPECT_NEAR(boxes[0].box.x_max, 0.8, 1e-12);
  EXPECT_NEAR(boxes[0].box.y_max, 0.3, 1e-12);
}

TEST(ApplyAffine, QuarterTurnMovesPixelsExactly) {
  const Frame f = gradient(10, 10, ChannelLayout::gray());
  const auto out = apply_affine({f, std::monostate{}}, make_rotation(90, {5, 5}), {10, 10});
  // (x, y) -> (10 - 1 - y, x) on pixel indices.
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) EXPECT_EQ(out.frame.at(9 - y, x, 0), f.at(x, y, 0));
}

TEST(ApplyAffine, BoxRotatedOutOfFrameIsDropped) {
  const auto t = make_rotation(180, {0, 0});
  const std::vector<LabeledBox> boxes = {{{0.1, 0.1, 0.3, 0.3}, 0}};
  const auto out = apply_affine({gradient(50, 50), boxes}, t, {50, 50});
  EXPECT_TRUE(std::get<std::vector<LabeledBox>>(out.labels).empty());
  EXPECT_EQ(out.frame.width(), 50u);

  // Pixel oracle: rasterize the box as a mask and warp it; nothing survives.
  PixelMap mask = PixelMap::filled(50, 50, 2);
  for (std::size_t y = 5; y < 15; ++y)
    for (std::size_t x = 5; x < 15; ++x) mask.set(x, y, 1);
  const auto warped = apply_affine({gradient(50, 50), mask}, t, {50, 50});
  const auto labels = std::get<PixelMap>(warped.labels).labels();
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 0);
}

TEST(ApplyAffine, PartialClipFollowsVisibleAreaRule) {
  // Shift right so that 30% of a 10 px wide box stays visible.
  const auto t = AffineTransform::translation(37, 0);
  const std::vector<LabeledBox> boxes = {{{0.6, 0.0, 0.7, 0.1}, 0}};
  const LabeledSample s{Frame::blank(100, 100, ChannelLayout::gray()), boxes};
  EXPECT_EQ(std::get<std::vector<LabeledBox>>(apply_affine(s, t, {100, 100}).labels).size(), 1u);
  EXPECT_TRUE(std::get<std::vector<LabeledBox>>(apply_affine(s, t, {100, 100}, {0.35}).labels).empty());
  EXPECT_TRUE(std::get<std::vector<LabeledBox>>(apply_affine(s, AffineTransform::translation(39, 0), {100, 100}).labels).empty());
}

TEST(ApplyAffine, MaskSizeMustMatchFrame) {
  expect_error(ErrorCode::DimensionMismatch, [] {
    apply_affine({Frame::blank(4, 4, ChannelLayout::gray()), PixelMap::filled(3, 4, 2)}, AffineTransform::identity(), {4, 4});
  });
}

TEST(ApplyAffine, BoxCoTransformMatchesRasterOracle) {
  CounterRng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const double bx = static_cast<double>(rng.uniform_int(20, 60)), by = static_cast<double>(rng.uniform_int(20, 60));
    const PixelBox box{bx, by, bx + static_cast<double>(rng.uniform_int(8, 30)), by + static_cast<double>(rng.uniform_int(8, 30))};
    const auto linear = compose(make_rotation(rng.uniform(0, 360), {50, 50}),
                                compose(make_shear(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)),
                                        AffineTransform::scaling(rng.uniform(0.7, 1.4), rng.uniform(0.7, 1.4))));
    const PixelBox moved = transform_box(box, linear);
    const auto t = compose(AffineTransform::translation(100 - (moved.x_min + moved.x_max) / 2, 100 - (moved.y_min + moved.y_max) / 2), linear);
    const PixelBox analytic = transform_box(box, t);

    oracle::Box raster{};
    ASSERT_TRUE(oracle::raster_transformed_bounds(t.matrix().data(), {box.x_min, box.y_min, box.x_max, box.y_max}, 200, 200, raster, 4));
    EXPECT_NEAR(analytic.x_min, raster.x0, 1.0) << "trial " << trial;
    EXPECT_NEAR(analytic.y_min, raster.y0, 1.0) << "trial " << trial;
    EXPECT_NEAR(analytic.x_max, raster.x1, 1.0) << "trial " << trial;
    EXPECT_NEAR(analytic.y_max, raster.y1, 1.0) << "trial " << trial;
  }
}

TEST(ApplyAffine, CompositionMatchesSequentialApplication) {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t1 = compose(AffineTransform::translation(rng.uniform(-5, 5), rng.uniform(-5, 5)),
                            make_rotation(90.0 * static_cast<double>(rng.uniform_int(0, 3)), {40, 40}));
    const auto t2 = compose(AffineTransform::translation(rng.uniform(-5, 5), rng.uniform(-5, 5)),
                            AffineTransform::scaling(rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2)));
    const std::vector<LabeledBox> boxes = {{{0.3, 0.35, 0.6, 0.55}, 0}};
    const LabeledSample s{gradient(80, 80), boxes};
    const auto direct = apply_affine(s, compose(t2, t1), {80, 80});
    const auto stepwise = apply_affine(apply_affine(s, t1, {80, 80}), t2, {80, 80});
    const auto& a = std::get<std::vector<LabeledBox>>(direct.labels);
    const auto& b = std::get<std::vector<LabeledBox>>(stepwise.labels);
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_NEAR(a[0].box.x_min * 80, b[0].box.x_min * 80, 1.0);
    EXPECT_NEAR(a[0].box.y_min * 80, b[0].box.y_min * 80, 1.0);
    EXPECT_NEAR(a[0].box.x_max * 80, b[0].box.x_max * 80, 1.0);
    EXPECT_NEAR(a[0].box.y_max * 80, b[0].box.y_max * 80, 1.0);
  }
}

TEST(Brightness, ShiftAndClamp) {
  const Frame f(3, 1, ChannelLayout::gray(), {250, 100, 0});
  EXPECT_EQ(brightness_shift(f, 0), f);
  const Frame up = brightness_shift(f, 20);
  EXPECT_EQ(up.pixels()[0], 255);
  EXPECT_EQ(up.pixels()[1], 120);
  const Frame down = brightness_shift(f, -30);
  EXPECT_EQ(down.pixels()[1], 70);
  EXPECT_EQ(down.pixels()[2], 0);
}

// SplitMix64 written out independently of CounterRng.
std::uint64_t splitmix_draw(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + i * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TEST(RandomCrop, FullSizeIsIdentity) {
  const Frame f = gradient(6, 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CounterRng rng(seed);
    EXPECT_EQ(random_crop({f, std::monostate{}}, {6, 5}, rng).frame, f);
  }
}

TEST(RandomCrop, OneByOneOriginReplaysTheGenerator) {
  const Frame f(2, 2, ChannelLayout::gray(), {11, 22, 33, 44});
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 12345ULL}) {
    CounterRng rng(seed);
    const auto out = random_crop({f, std::monostate{}}, {1, 1}, rng);
    const std::size_t x0 = splitmix_draw(seed, 1) % 2;
    const std::size_t y0 = splitmix_draw(seed, 2) % 2;
    EXPECT_EQ(out.frame.pixels()[0], f.at(x0, y0, 0)) << "seed " << seed;
  }
}

TEST(RandomCrop, DeterministicAndCoTransformsLabels) {
  const Frame f = gradient(40, 30);
  const std::vector<LabeledBox> boxes = {{{0.25, 0.2, 0.5, 0.6}, 1}};
  CounterRng a(9), b(9);
  const auto ca = random_crop({f, boxes}, {20, 20}, a);
  const auto cb = random_crop({f, boxes}, {20, 20}, b);
  EXPECT_EQ(ca.frame, cb.frame);

  // Masks crop with the same window as the frame.
  PixelMap mask = PixelMap::filled(40, 30, 4);
  for (std::size_t y = 0; y < 30; ++y)
    for (std::size_t x = 0; x < 40; ++x) mask.set(x, y, static_cast<std::uint8_t>((x + y) % 4));
  const auto cropped = crop({f, mask}, 7, 3, {10, 12});
  const auto& cm = std::get<PixelMap>(cropped.labels);
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      EXPECT_EQ(cm.at(x, y), mask.at(x + 7, y + 3));
      EXPECT_EQ(cropped.frame.at(x, y, 0), f.at(x + 7, y + 3, 0));
    }

  const auto boxed = crop({f, boxes}, 5, 0, {20, 20});
  const auto& bb = std::get<std::vector<LabeledBox>>(boxed.labels);
  ASSERT_EQ(bb.size(), 1u);
  EXPECT_NEAR(bb[0].box.x_min, (10.0 - 5) / 20, 1e-12);
  EXPECT_NEAR(bb[0].box.y_max, 18.0 / 20, 1e-12);
}

TEST(RandomCrop, TooLarge) {
  CounterRng rng(1);
  expect_error(ErrorCode::CropTooLarge, [&] { random_crop({gradient(4, 4), std::monostate{}}, {5, 4}, rng); });
}

TEST(Noise, ZeroSigmaAndDeterminism) {
  const Frame f = gradient(16, 16);
  CounterRng r0(3);
  EXPECT_EQ(add_noise(f, 0, r0), f);
  CounterRng a(77), b(77);
  EXPECT_EQ(add_noise(f, 12, a), add_noise(f, 12, b));
}

TEST(Noise, MeanPreservedAtMidGray) {
  const Frame f(256, 256, ChannelLayout::gray(), std::vector<std::uint8_t>(256 * 256, 128));
  CounterRng rng(2);
  const Frame noisy = add_noise(f, 10, rng);
  double sum = 0;
  for (auto p : noisy.pixels()) sum += p;
  EXPECT_NEAR(sum / (256.0 * 256.0), 128.0, 1.0);
  EXPECT_NE(noisy, f);
}

}  // namespace
}  // namespace aerovision
