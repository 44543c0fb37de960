#include <gtest/gtest.h>

#include <cmath>

#include "aerovision/metrics.hpp"
#include "aerovision/postprocess.hpp"
#include "aerovision/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace aerovision {
namespace {

GridTensor zero_grid(std::size_t s, std::size_t c, Anchor anchor) {
  GridTensor t{s, s, c, {anchor}, {}};
  t.values.assign(t.expected_size(), 0.0f);
  return t;
}

// Element-wise scalar evaluation of the decode formulas.
struct RefDet {
  double x0, y0, x1, y1, conf;
  std::size_t cls;
};

RefDet reference_decode(const GridTensor& t, std::size_t cx, std::size_t cy, std::size_t a) {
  const float* e = t.values.data() + ((cy * t.grid_w + cx) * t.anchors.size() + a) * (5 + t.num_classes);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double bx = (sig(e[0]) + static_cast<double>(cx)) / static_cast<double>(t.grid_w);
  const double by = (sig(e[1]) + static_cast<double>(cy)) / static_cast<double>(t.grid_h);
  const double bw = t.anchors[a].width * std::exp(static_cast<double>(e[2]));
  const double bh = t.anchors[a].height * std::exp(static_cast<double>(e[3]));
  double denom = 0;
  std::size_t best = 0;
  for (std::size_t k = 0; k < t.num_classes; ++k) {
    denom += std::exp(static_cast<double>(e[5 + k]));
    if (e[5 + k] > e[5 + best]) best = k;
  }
  const double p = std::exp(static_cast<double>(e[5 + best])) / denom;
  auto clip = [](double v) { return std::min(1.0, std::max(0.0, v)); };
  return {clip(bx - bw / 2), clip(by - bh / 2), clip(bx + bw / 2), clip(by + bh / 2), sig(e[4]) * p, best};
}

TEST(DecodeGrid, ZeroLogits) {
  for (std::size_t c : {1u, 2u, 5u}) {
    const auto t = zero_grid(13, c, {0.2, 0.3});
    const auto dets = decode_grid(t);
    ASSERT_EQ(dets.size(), 169u);
    for (std::size_t cy = 0; cy < 13; ++cy)
      for (std::size_t cx = 0; cx < 13; ++cx) {
        const auto& d = dets[cy * 13 + cx];
        const double mx = (static_cast<double>(cx) + 0.5) / 13, my = (static_cast<double>(cy) + 0.5) / 13;
        auto clip = [](double v) { return std::min(1.0, std::max(0.0, v)); };
        EXPECT_NEAR(d.box.x_min, clip(mx - 0.1), 1e-9);
        EXPECT_NEAR(d.box.x_max, clip(mx + 0.1), 1e-9);
        EXPECT_NEAR(d.box.y_min, clip(my - 0.15), 1e-9);
        EXPECT_NEAR(d.box.y_max, clip(my + 0.15), 1e-9);
        EXPECT_NEAR(d.confidence, 0.5 / static_cast<double>(c), 1e-12);
        EXPECT_EQ(d.class_id, 0u);
        if (cx == 6 && cy == 6) {
          EXPECT_NEAR(d.box.x_max - d.box.x_min, 0.2, 1e-9);
          EXPECT_NEAR(d.box.y_max - d.box.y_min, 0.3, 1e-9);
        }
      }
  }
}

TEST(DecodeGrid, VeryNegativeObjectness) {
  auto t = zero_grid(2, 2, {0.1, 0.1});
  for (std::size_t i = 4; i < t.values.size(); i += t.stride()) t.values[i] = -60.0f;
  for (const auto& d : decode_grid(t)) EXPECT_LT(d.confidence, 1e-20);
}

TEST(DecodeGrid, MatchesScalarOracle) {
  CounterRng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    GridTensor t{2, 2, 2, {{0.3, 0.2}}, {}};
    if (trial % 2) t.anchors.push_back({0.1, 0.4});
    t.values.resize(t.expected_size());
    for (auto& v : t.values) v = static_cast<float>(rng.uniform(-3, 3));
    const std::vector<std::string> vocab = {"a", "b"};
    const auto dets = decode_grid(t, vocab);
    ASSERT_EQ(dets.size(), 4 * t.anchors.size());
    std::size_t i = 0;
    for (std::size_t cy = 0; cy < 2; ++cy)
      for (std::size_t cx = 0; cx < 2; ++cx)
        for (std::size_t a = 0; a < t.anchors.size(); ++a, ++i) {
          const auto ref = reference_decode(t, cx, cy, a);
          EXPECT_NEAR(dets[i].box.x_min, ref.x0, 1e-6);
          EXPECT_NEAR(dets[i].box.y_min, ref.y0, 1e-6);
          EXPECT_NEAR(dets[i].box.x_max, ref.x1, 1e-6);
          EXPECT_NEAR(dets[i].box.y_max, ref.y1, 1e-6);
          EXPECT_NEAR(dets[i].confidence, ref.conf, 1e-6);
          EXPECT_EQ(dets[i].class_id, ref.cls);
          EXPECT_EQ(dets[i].class_name, vocab[ref.cls]);
          EXPECT_TRUE(dets[i].box.is_valid());
        }
  }
}

TEST(DecodeGrid, Malformed) {
  auto t = zero_grid(2, 2, {0.1, 0.1});
  t.values.pop_back();
  expect_error(ErrorCode::MalformedTensor, [&] { decode_grid(t); });
  const auto ok = zero_grid(2, 2, {0.1, 0.1});
  const std::vector<std::string> vocab = {"only"};
  expect_error(ErrorCode::MalformedTensor, [&] { decode_grid(ok, vocab); });
}

Detection det(BoundingBox b, double conf, std::size_t cls = 0) { return {b, cls, "", conf}; }

TEST(ConfidenceFilter, Cases) {
  const std::vector<Detection> in = {det({0, 0, 0.1, 0.1}, 0.9), det({0, 0, 0.2, 0.2}, 0.4)};
  EXPECT_EQ(confidence_filter(in, 0), in);
  const auto out = confidence_filter(in, 0.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].confidence, 0.9);
  EXPECT_TRUE(confidence_filter({}, 0.5).empty());
  EXPECT_EQ(confidence_filter(in, 0.4).size(), 2u);
}

TEST(Nms, Examples) {
  const std::vector<Detection> one = {det({0, 0, 0.1, 0.1}, 0.3)};
  EXPECT_EQ(nms(one, 0.5), one);

  // Boxes sharing 0.75 of their width: IoU = 0.75 / 1.25 = 0.6.
  const BoundingBox a{0, 0, 0.4, 0.1}, b{0.1, 0, 0.5, 0.1};
  ASSERT_NEAR(box_iou(a, b), 0.6, 1e-12);
  const std::vector<Detection> same = {det(b, 0.8), det(a, 0.9)};
  const auto kept = nms(same, 0.5);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].confidence, 0.9);
  const auto ref = oracle::reference_nms({{{0.1, 0, 0.5, 0.1}, 0, 0.8}, {{0, 0, 0.4, 0.1}, 0, 0.9}}, 0.5);
  EXPECT_EQ(ref, (std::vector<int>{1}));

  const std::vector<Detection> diff = {det(a, 0.9, 0), det(b, 0.8, 1)};
  EXPECT_EQ(nms(diff, 0.5).size(), 2u);
  EXPECT_EQ(nms(diff, 0.5, true).size(), 1u);
}

TEST(Nms, MatchesReferenceAndIsIdempotent) {
  CounterRng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.uniform_int(0, 10);
    const bool agnostic = trial % 3 == 0;
    std::vector<Detection> dets;
    std::vector<oracle::Det> ref;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.uniform(0, 0.5), y = rng.uniform(0, 0.5);
      const BoundingBox b{x, y, x + rng.uniform(0.1, 0.4), y + rng.uniform(0.1, 0.4)};
      const double conf = static_cast<double>(rng.uniform_int(1, 5)) / 5.0;
      const std::size_t cls = rng.uniform_int(0, 2);
      dets.push_back(det(b, conf, cls));
      ref.push_back({{b.x_min, b.y_min, b.x_max, b.y_max}, static_cast<int>(cls), conf});
    }
    const auto kept = nms(dets, 0.45, agnostic);
    const auto expect = oracle::reference_nms(ref, 0.45, agnostic);
    ASSERT_EQ(kept.size(), expect.size()) << "trial " << trial;
    for (std::size_t i = 0; i < kept.size(); ++i) EXPECT_EQ(kept[i], dets[static_cast<std::size_t>(expect[i])]);
    EXPECT_EQ(nms(kept, 0.45, agnostic), kept);
  }
}

TEST(DecodeSegmentation, ArgmaxAndTies) {
  const std::vector<float> two = {0.1f, 2.0f};
  EXPECT_EQ(decode_segmentation(two, 1, 1, 2).at(0, 0), 1);
  const std::vector<float> tie = {1.0f, 1.0f, 1.0f};
  EXPECT_EQ(decode_segmentation(tie, 1, 1, 3).at(0, 0), 0);
  expect_error(ErrorCode::DimensionMismatch, [&] { decode_segmentation(two, 2, 1, 2); });
}

TEST(DecodeSegmentation, MatchesOracleAndShiftInvariant) {
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> logits(4 * 4 * 3);
    for (auto& v : logits) v = static_cast<float>(rng.uniform_int(0, 6)) / 2.0f;
    const auto map = decode_segmentation(logits, 4, 4, 3);
    auto shifted = logits;
    for (std::size_t p = 0; p < 16; ++p) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 3; ++k)
        if (logits[p * 3 + k] > logits[p * 3 + best]) best = k;
      EXPECT_EQ(map.at(p % 4, p / 4), best);
      const float c = static_cast<float>(rng.uniform_int(0, 8)) - 4.0f;
      for (std::size_t k = 0; k < 3; ++k) shifted[p * 3 + k] += c;
    }
    EXPECT_EQ(decode_segmentation(shifted, 4, 4, 3), map);
  }
}

TEST(DecodeAction, Cases) {
  const std::vector<ActionScores> peak = {{0, 0, 0, 5, 0, 0}};
  EXPECT_EQ(decode_action(peak).class_id, 3u);

  const std::vector<ActionScores> uniform(4, ActionScores{1, 1, 1, 1, 1, 1});
  const auto u = decode_action(uniform);
  EXPECT_EQ(u.class_id, 0u);
  EXPECT_NEAR(u.confidence, 1.0 / 6.0, 1e-12);

  const std::vector<ActionScores> mixed = {{1, 0, 0, 0, 0, 2}, {0, 3, 0, 0, 0, 1}, {2, 0, 0, 1, 0, 0}};
  // Means: (1, 1, 0, 1/3, 0, 1); softmax max over classes 0,1,5 -> class 0 by tie-break.
  const double mean[6] = {1, 1, 0, 1.0 / 3, 0, 1};
  double denom = 0;
  for (double m : mean) denom += std::exp(m);
  const auto r = decode_action(mixed);
  EXPECT_EQ(r.class_id, 0u);
  EXPECT_NEAR(r.confidence, std::exp(1.0) / denom, 1e-6);

  expect_error(ErrorCode::EmptyWindow, [] { decode_action({}); });
  EXPECT_STREQ((ActionResult{0, 1, 5, 0.5}.class_name()), "throw");
}

TEST(DecodeAction, PerFrameShiftLeavesArgmax) {
  CounterRng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ActionScores> w(rng.uniform_int(1, 8));
    for (auto& s : w)
      for (auto& v : s) v = static_cast<float>(rng.uniform(-2, 2));
    auto shifted = w;
    for (auto& s : shifted) {
      const float c = static_cast<float>(rng.uniform_int(0, 4));
      for (auto& v : s) v += c;
    }
    EXPECT_EQ(decode_action(w).class_id, decode_action(shifted).class_id);
  }
}

}  // namespace
}  // namespace aerovision
