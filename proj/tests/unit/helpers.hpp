#pragma once

#include <cmath>
#include <random>

#include "motionxfer/image.hpp"
#include "motionxfer/pose.hpp"

namespace mxf::fixture {

inline Image random_image(std::mt19937_64& rng, int h, int w, int c, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(h, w, c);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

inline Mask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Mask m(h, w);
  for (auto& v : m.data()) v = b(rng) ? 1 : 0;
  return m;
}

/// Upright stick figure inside an h x w frame; every keypoint visible.
inline Pose2D stick_pose(double cx, double cy, double scale) {
  Pose2D p;
  auto set = [&](Keypoint k, double x, double y) {
    p[k] = {cx + scale * x, cy + scale * y};
    p.visible[static_cast<int>(k)] = true;
  };
  set(Keypoint::kNose, 0, -1.6);
  set(Keypoint::kNeck, 0, -1.2);
  set(Keypoint::kMidHip, 0, 0);
  set(Keypoint::kLShoulder, 0.4, -1.2);
  set(Keypoint::kRShoulder, -0.4, -1.2);
  set(Keypoint::kLElbow, 0.7, -0.7);
  set(Keypoint::kRElbow, -0.7, -0.7);
  set(Keypoint::kLWrist, 0.9, -0.2);
  set(Keypoint::kRWrist, -0.9, -0.2);
  set(Keypoint::kLHip, 0.25, 0);
  set(Keypoint::kRHip, -0.25, 0);
  set(Keypoint::kLKnee, 0.3, 0.7);
  set(Keypoint::kRKnee, -0.3, 0.7);
  set(Keypoint::kLAnkle, 0.3, 1.4);
  set(Keypoint::kRAnkle, -0.3, 1.4);
  p.landmarks[static_cast<int>(Landmark::kFace)] = {p[Keypoint::kNose]};
  p.landmarks[static_cast<int>(Landmark::kLHand)] = {p[Keypoint::kLWrist]};
  p.landmarks[static_cast<int>(Landmark::kRHand)] = {p[Keypoint::kRWrist]};
  p.landmarks[static_cast<int>(Landmark::kLFoot)] = {p[Keypoint::kLAnkle]};
  p.landmarks[static_cast<int>(Landmark::kRFoot)] = {p[Keypoint::kRAnkle]};
  return p;
}

/// Stick pose with every keypoint jittered.
inline Pose2D jittered_pose(std::mt19937_64& rng, double cx, double cy, double scale, double jitter) {
  Pose2D p = stick_pose(cx, cy, scale);
  std::normal_distribution<double> n(0.0, jitter);
  for (auto& k : p.keypoints) k = {k.x + n(rng), k.y + n(rng)};
  return p;
}

inline Pose2D similarity(const Pose2D& p, double angle, double s, Point2 t) {
  Pose2D q = p;
  const double c = std::cos(angle) * s, sn = std::sin(angle) * s;
  auto map = [&](Point2 a) { return Point2{c * a.x - sn * a.y + t.x, sn * a.x + c * a.y + t.y}; };
  for (auto& k : q.keypoints) k = map(k);
  for (auto& set : q.landmarks)
    for (auto& a : set) a = map(a);
  return q;
}

}  // namespace mxf::fixture
