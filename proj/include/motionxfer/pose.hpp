#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mxf {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(Point2 a, Point2 b);

enum class Keypoint : int {
  kNose = 0,
  kNeck,
  kMidHip,
  kLShoulder,
  kRShoulder,
  kLElbow,
  kRElbow,
  kLWrist,
  kRWrist,
  kLHip,
  kRHip,
  kLKnee,
  kRKnee,
  kLAnkle,
  kRAnkle,
};
inline constexpr int kNumKeypoints = 15;

/// Canonical part order; heat-map channels and warped slabs follow it.
enum class Part : int {
  kHead = 0,
  kTorso,
  kLUpperArm,
  kRUpperArm,
  kLLowerArm,
  kRLowerArm,
  kLUpperLeg,
  kRUpperLeg,
  kLLowerLeg,
  kRLowerLeg,
};
inline constexpr int kNumParts = 10;

enum class Landmark : int { kFace = 0, kLHand, kRHand, kLFoot, kRFoot };
inline constexpr int kNumLandmarkSets = 5;
inline constexpr int kMaxLandmarkPoints = 8;

std::string_view keypoint_name(Keypoint k);
std::string_view part_name(Part p);
std::string_view landmark_name(Landmark l);

/// (proximal, distal) keypoints defining each part's bone.
std::pair<Keypoint, Keypoint> part_endpoints(Part p);
/// Keypoint whose visibility gates a landmark set.
Keypoint landmark_parent(Landmark l);

struct Pose2D {
  std::array<Point2, kNumKeypoints> keypoints{};
  std::array<bool, kNumKeypoints> visible{};
  std::array<std::vector<Point2>, kNumLandmarkSets> landmarks{};

  Point2& operator[](Keypoint k) { return keypoints[static_cast<int>(k)]; }
  const Point2& operator[](Keypoint k) const { return keypoints[static_cast<int>(k)]; }
  bool is_visible(Keypoint k) const { return visible[static_cast<int>(k)]; }
  const std::vector<Point2>& landmark(Landmark l) const { return landmarks[static_cast<int>(l)]; }

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Empty optional when valid, otherwise the first violated invariant.
std::optional<std::string> validate_pose(const Pose2D& pose, int height, int width);

struct PartSegment {
  Part part = Part::kHead;
  Point2 proximal;
  Point2 distal;
  bool missing = false;
  std::string diagnostic;  // why a segment is missing

  double length() const { return distance(proximal, distal); }
};

inline constexpr double kMinSegmentLength = 1.0;

/// Ten segments in canonical order; invisible or degenerate ones flagged.
std::array<PartSegment, kNumParts> part_segments(const Pose2D& pose);

/// Row-major 2x3: [a b tx; c d ty].
struct AffineMatrix {
  std::array<double, 6> m{1, 0, 0, 0, 1, 0};

  static AffineMatrix identity() { return {}; }
  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }
  Point2 apply(Point2 p) const {
    return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
  }
  /// Throws on a singular linear block.
  AffineMatrix inverse() const;
  /// (this * other)(p) == this(other(p)).
  AffineMatrix compose(const AffineMatrix& other) const;
};

struct PartTransformSet {
  std::array<AffineMatrix, kNumParts> transforms{};
  std::array<bool, kNumParts> missing{};

  const AffineMatrix& operator[](Part p) const { return transforms[static_cast<int>(p)]; }
  bool is_missing(Part p) const { return missing[static_cast<int>(p)]; }
};

/// Similarity (rotation, uniform scale, translation) taking src endpoints
/// exactly onto dst endpoints. Throws when either segment is degenerate.
AffineMatrix estimate_part_transform(const PartSegment& src, const PartSegment& dst);

/// Part-wise transforms aligning `input` onto `reference`; a part missing in
/// either pose is flagged.
PartTransformSet estimate_part_transforms(const Pose2D& input, const Pose2D& reference);

/// Translates mid-hip to the origin and scales the neck/mid-hip distance to 1.
Pose2D normalize_pose(const Pose2D& pose);

inline constexpr int kMinSharedKeypoints = 4;

/// Mean keypoint distance over keypoints visible in both normalised poses.
double pose_distance(const Pose2D& a, const Pose2D& b);

struct NearestPose {
  std::size_t index = 0;
  double distance = 0.0;
  double novelty = 0.0;     // mean of the k smallest distances
  std::size_t k_used = 0;   // < k when the pool was smaller
};

inline constexpr int kDefaultNoveltyK = 10;

NearestPose nearest_training_pose(const Pose2D& ref, std::span<const Pose2D> pool,
                                  int k = kDefaultNoveltyK);

/// Fills neck / mid-hip from shoulder / hip midpoints when those are visible.
void complete_derived_keypoints(Pose2D& pose);

}  // namespace mxf
