#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "motionxfer/error.hpp"
#include "motionxfer/heatmap.hpp"

using namespace mxf;

namespace {

PartSegment seg(Point2 a, Point2 b, Part part = Part::kTorso) {
  PartSegment s;
  s.part = part;
  s.proximal = a;
  s.distal = b;
  return s;
}

float max_of(const Image& m, int c = 0) {
  float peak = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) peak = std::max(peak, m.at(y, x, c));
  return peak;
}

}  // namespace

TEST(GaussianKernel, NormalisedWithRadiusFourSigma) {
  const auto k = gaussian_kernel(1.3);
  EXPECT_EQ(k.size(), 2u * 6 + 1);
  double s = 0;
  for (double v : k) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_THROW(gaussian_kernel(0.0), Error);
}

TEST(GaussianBlur, SeparableEqualsDense) {
  std::mt19937_64 rng(1);
  const auto img = fixture::random_image(rng, 20, 17, 1, 0, 1);
  const auto a = gaussian_blur(img, 1.7);
  const auto b = oracle::dense_blur(img, 1.7);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 17; ++x) EXPECT_NEAR(a.at(y, x), b.at(y, x), 1e-6);
}

TEST(PartShape, MatchesCornerOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(2, 30);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = seg({u(rng), u(rng)}, {u(rng), u(rng)}, trial % 5 == 0 ? Part::kHead : Part::kLUpperLeg);
    if (s.length() < 2) continue;
    const double width = 3.3 + trial * 0.1;
    EXPECT_EQ(part_shape_mask(s, 32, 32, width), oracle::shape(s, 32, 32, width)) << "trial " << trial;
  }
}

TEST(PartChannel, InteriorIsOneAndTailVanishes) {
  const double sigma = 1.0;
  const auto s = seg({8.3, 16.2}, {24.1, 16.2});
  const auto ch = rasterize_part_channel(s, 32, 32, 10.0, sigma);
  EXPECT_FLOAT_EQ(ch.grid.at(16, 16), 1.0f);
  EXPECT_FALSE(ch.clipped);
  // Rectangle spans y in [11.2, 21.2]; 4 sigma beyond is below 1e-3.
  for (int x = 0; x < 32; ++x) {
    EXPECT_LT(ch.grid.at(26, x), 1e-3);
    EXPECT_LT(ch.grid.at(5, x), 1e-3);
  }
}

TEST(PartChannel, EqualsDenseConvolutionOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(4, 28);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = seg({u(rng), u(rng)}, {u(rng), u(rng)}, trial % 3 == 0 ? Part::kHead : Part::kTorso);
    if (s.length() < 3) continue;
    const double width = std::max(3.0, 0.25 * s.length());
    const auto ch = rasterize_part_channel(s, 32, 32, width, 0.64);
    Image expected = oracle::dense_blur(oracle::shape(s, 32, 32, width), 0.64);
    oracle::rescale(expected);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) ASSERT_NEAR(ch.grid.at(y, x), expected.at(y, x), 1e-6);
  }
}

TEST(PartChannel, ClippedShapeIsFlagged) {
  const auto ch = rasterize_part_channel(seg({-5, 10}, {12, 10}), 32, 32, 4, 1);
  EXPECT_TRUE(ch.clipped);
  EXPECT_FLOAT_EQ(max_of(ch.grid), 1.0f);
}

TEST(PartChannel, TranslationEquivariant) {
  const auto a = rasterize_part_channel(seg({10.2, 9.7}, {18.6, 15.1}), 40, 40, 4, 1.0).grid;
  const auto b = rasterize_part_channel(seg({13.2, 14.7}, {21.6, 20.1}), 40, 40, 4, 1.0).grid;
  for (int y = 0; y < 35; ++y)
    for (int x = 0; x < 37; ++x) EXPECT_NEAR(a.at(y, x), b.at(y + 5, x + 3), 1e-6);
}

TEST(LandmarkChannel, PeakMaxAndEmpty) {
  const std::vector<Point2> one{{10, 12}};
  const auto a = rasterize_landmark_channel(one, 32, 32, 1.5);
  EXPECT_FLOAT_EQ(a.at(12, 10), 1.0f);
  const std::vector<Point2> two{{10, 12}, {10, 12}};
  EXPECT_EQ(rasterize_landmark_channel(two, 32, 32, 1.5), a);
  const auto z = rasterize_landmark_channel({}, 32, 32, 1.5);
  EXPECT_EQ(max_of(z), 0.0f);
}

TEST(LandmarkChannel, MatchesPerPixelMaxOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 31);
  const std::vector<Point2> pts{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
  const double sigma = 2.0;
  const auto ch = rasterize_landmark_channel(pts, 32, 32, sigma);
  Image expected(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      double best = 0;
      for (const auto& p : pts) best = std::max(best, std::exp(-((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)) / (2 * sigma * sigma)));
      expected.at(y, x) = static_cast<float>(best);
    }
  oracle::rescale(expected);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) EXPECT_NEAR(ch.at(y, x), expected.at(y, x), 1e-6);
}

TEST(PoseVolume, FifteenChannelsAllPeakAtOne) {
  const auto p = fixture::stick_pose(32, 34, 12);
  const auto v = build_pose_volume(p, 64, 64);
  ASSERT_EQ(v.grid.channels(), 15);
  for (int c = 0; c < 15; ++c) EXPECT_FLOAT_EQ(max_of(v.grid, c), 1.0f) << "channel " << c;
  for (float x : v.grid.data()) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(PoseVolume, MissingLeftHandZeroesItsChannel) {
  Pose2D p = fixture::stick_pose(32, 34, 12);
  p.visible[static_cast<int>(Keypoint::kLWrist)] = false;
  const auto v = build_pose_volume(p, 64, 64);
  // Left hand is the twelfth channel counting from one.
  EXPECT_EQ(max_of(v.grid, kNumParts + static_cast<int>(Landmark::kLHand)), 0.0f);
  EXPECT_EQ(max_of(v.grid, static_cast<int>(Part::kLLowerArm)), 0.0f);
  EXPECT_FLOAT_EQ(max_of(v.grid, kNumParts + static_cast<int>(Landmark::kRHand)), 1.0f);
}

TEST(PoseVolume, ChannelsEqualIndependentRasterisation) {
  const auto p = fixture::stick_pose(16, 17, 6);
  RasterConfig cfg;
  const auto v = build_pose_volume(p, 32, 32, cfg);
  const auto segs = part_segments(p);
  const double sigma = cfg.resolved_sigma(32, 32);
  for (int i = 0; i < kNumParts; ++i) {
    const double rw = std::max(3.0, 0.25 * segs[i].length());
    const auto ch = rasterize_part_channel(segs[i], 32, 32, rw, sigma).grid;
    EXPECT_EQ(v.grid.channel_slice(i, 1), ch);
  }
  for (int l = 0; l < kNumLandmarkSets; ++l) {
    const auto ch = rasterize_landmark_channel(p.landmarks[l], 32, 32, sigma);
    EXPECT_EQ(v.grid.channel_slice(kNumParts + l, 1), ch);
  }
}

TEST(StackTemporal, ChannelCountAndPadding) {
  const auto a = build_pose_volume(fixture::stick_pose(16, 17, 6), 32, 32);
  const auto b = build_pose_volume(fixture::stick_pose(15, 17, 6), 32, 32);
  const auto c = build_pose_volume(fixture::stick_pose(14, 17, 6), 32, 32);
  const std::vector<PoseVolume> three{a, b, c};
  const auto s3 = stack_temporal(three, 3);
  EXPECT_EQ(s3.grid.channels(), 45);
  EXPECT_EQ(s3.grid.channel_slice(0, 15), a.grid);
  EXPECT_EQ(s3.grid.channel_slice(30, 15), c.grid);

  const std::vector<PoseVolume> one{a};
  const auto s1 = stack_temporal(one, 3);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(s1.grid.channel_slice(15 * k, 15), a.grid);
  EXPECT_EQ(stack_temporal(one, 1).grid, a.grid);
  EXPECT_THROW(stack_temporal(std::span<const PoseVolume>{}, 3), Error);
}
