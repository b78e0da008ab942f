#include "motionxfer/pose.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "motionxfer/error.hpp"
#include "motionxfer/log.hpp"

namespace mxf {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string_view keypoint_name(Keypoint k) {
  static constexpr std::array<std::string_view, kNumKeypoints> kNames = {
      "nose",       "neck",    "mid_hip", "l_shoulder", "r_shoulder",
      "l_elbow",    "r_elbow", "l_wrist", "r_wrist",    "l_hip",
      "r_hip",      "l_knee",  "r_knee",  "l_ankle",    "r_ankle"};
  return kNames[static_cast<int>(k)];
}

std::string_view part_name(Part p) {
  static constexpr std::array<std::string_view, kNumParts> kNames = {
      "head",        "torso",       "l_upper_arm", "r_upper_arm", "l_lower_arm",
      "r_lower_arm", "l_upper_leg", "r_upper_leg", "l_lower_leg", "r_lower_leg"};
  return kNames[static_cast<int>(p)];
}

std::string_view landmark_name(Landmark l) {
  static constexpr std::array<std::string_view, kNumLandmarkSets> kNames = {
      "face", "lhand", "rhand", "lfoot", "rfoot"};
  return kNames[static_cast<int>(l)];
}

std::pair<Keypoint, Keypoint> part_endpoints(Part p) {
  using K = Keypoint;
  switch (p) {
    case Part::kHead: return {K::kNose, K::kNeck};
    case Part::kTorso: return {K::kNeck, K::kMidHip};
    case Part::kLUpperArm: return {K::kLShoulder, K::kLElbow};
    case Part::kRUpperArm: return {K::kRShoulder, K::kRElbow};
    case Part::kLLowerArm: return {K::kLElbow, K::kLWrist};
    case Part::kRLowerArm: return {K::kRElbow, K::kRWrist};
    case Part::kLUpperLeg: return {K::kLHip, K::kLKnee};
    case Part::kRUpperLeg: return {K::kRHip, K::kRKnee};
    case Part::kLLowerLeg: return {K::kLKnee, K::kLAnkle};
    case Part::kRLowerLeg: return {K::kRKnee, K::kRAnkle};
  }
  throw Error("part_endpoints: bad part");
}

Keypoint landmark_parent(Landmark l) {
  switch (l) {
    case Landmark::kFace: return Keypoint::kNose;
    case Landmark::kLHand: return Keypoint::kLWrist;
    case Landmark::kRHand: return Keypoint::kRWrist;
    case Landmark::kLFoot: return Keypoint::kLAnkle;
    case Landmark::kRFoot: return Keypoint::kRAnkle;
  }
  throw Error("landmark_parent: bad landmark");
}

std::optional<std::string> validate_pose(const Pose2D& pose, int height, int width) {
  auto finite = [](Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); };
  for (int i = 0; i < kNumKeypoints; ++i) {
    const Point2 p = pose.keypoints[i];
    const auto name = std::string(keypoint_name(static_cast<Keypoint>(i)));
    if (!finite(p)) return "keypoint " + name + " is not finite";
    if (pose.visible[i] && (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)) {
      return "visible keypoint " + name + " outside the frame";
    }
  }
  for (int l = 0; l < kNumLandmarkSets; ++l) {
    const auto lm = static_cast<Landmark>(l);
    const auto& pts = pose.landmarks[l];
    if (pts.size() > static_cast<std::size_t>(kMaxLandmarkPoints)) {
      return "landmark set " + std::string(landmark_name(lm)) + " has too many points";
    }
    if (pose.is_visible(landmark_parent(lm)) && pts.empty()) {
      return "landmark set " + std::string(landmark_name(lm)) + " empty with visible parent";
    }
    for (const auto& p : pts) {
      if (!finite(p)) return "landmark in " + std::string(landmark_name(lm)) + " is not finite";
    }
  }
  return std::nullopt;
}

std::array<PartSegment, kNumParts> part_segments(const Pose2D& pose) {
  std::array<PartSegment, kNumParts> out;
  for (int i = 0; i < kNumParts; ++i) {
    const auto part = static_cast<Part>(i);
    const auto [a, b] = part_endpoints(part);
    PartSegment& s = out[i];
    s.part = part;
    s.proximal = pose[a];
    s.distal = pose[b];
    if (!pose.is_visible(a) || !pose.is_visible(b)) {
      s.missing = true;
      s.diagnostic = std::string(part_name(part)) + ": endpoint not visible";
    } else if (s.length() <= kMinSegmentLength) {
      s.missing = true;
      s.diagnostic = std::string(part_name(part)) + ": degenerate segment";
    }
  }
  return out;
}

AffineMatrix AffineMatrix::inverse() const {
  const double det = determinant();
  if (!(std::abs(det) > 1e-12) || !std::isfinite(det)) throw Error("AffineMatrix: singular linear block");
  const double ia = m[4] / det, ib = -m[1] / det, ic = -m[3] / det, id = m[0] / det;
  return {{ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])}};
}

AffineMatrix AffineMatrix::compose(const AffineMatrix& o) const {
  return {{m[0] * o.m[0] + m[1] * o.m[3], m[0] * o.m[1] + m[1] * o.m[4],
           m[0] * o.m[2] + m[1] * o.m[5] + m[2], m[3] * o.m[0] + m[4] * o.m[3],
           m[3] * o.m[1] + m[4] * o.m[4], m[3] * o.m[2] + m[4] * o.m[5] + m[5]}};
}

AffineMatrix estimate_part_transform(const PartSegment& src, const PartSegment& dst) {
  const auto name = std::string(part_name(src.part));
  for (const Point2& p : {src.proximal, src.distal, dst.proximal, dst.distal})
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("estimate_part_transform: non-finite endpoint for part " + name);
  if (src.length() <= kMinSegmentLength || dst.length() <= kMinSegmentLength) {
    throw Error("estimate_part_transform: degenerate segment for part " + name);
  }
  // Rotation+scale as the complex ratio of the two bone vectors.
  using C = std::complex<double>;
  const C u(src.distal.x - src.proximal.x, src.distal.y - src.proximal.y);
  const C v(dst.distal.x - dst.proximal.x, dst.distal.y - dst.proximal.y);
  const C z = v / u;
  const double a = z.real(), b = z.imag();
  AffineMatrix out{{a, -b, 0.0, b, a, 0.0}};
  const Point2 rp = out.apply(src.proximal);
  out.m[2] = dst.proximal.x - rp.x;
  out.m[5] = dst.proximal.y - rp.y;
  return out;
}

PartTransformSet estimate_part_transforms(const Pose2D& input, const Pose2D& reference) {
  const auto src = part_segments(input);
  const auto dst = part_segments(reference);
  PartTransformSet out;
  for (int i = 0; i < kNumParts; ++i) {
    if (src[i].missing || dst[i].missing) {
      out.missing[i] = true;
      continue;
    }
    out.transforms[i] = estimate_part_transform(src[i], dst[i]);
  }
  return out;
}

Pose2D normalize_pose(const Pose2D& pose) {
  if (!pose.is_visible(Keypoint::kNeck) || !pose.is_visible(Keypoint::kMidHip)) {
    throw Error("normalize_pose: neck and mid-hip must be visible");
  }
  const Point2 origin = pose[Keypoint::kMidHip];
  const double torso = distance(pose[Keypoint::kNeck], origin);
  if (!(torso > 1e-9)) throw Error("normalize_pose: degenerate torso");
  const double s = 1.0 / torso;
  Pose2D out = pose;
  for (auto& p : out.keypoints) p = s * (p - origin);
  for (auto& set : out.landmarks)
    for (auto& p : set) p = s * (p - origin);
  return out;
}

double pose_distance(const Pose2D& a, const Pose2D& b) {
  const Pose2D na = normalize_pose(a);
  const Pose2D nb = normalize_pose(b);
  double sum = 0.0;
  int shared = 0;
  for (int i = 0; i < kNumKeypoints; ++i) {
    if (!na.visible[i] || !nb.visible[i]) continue;
    sum += distance(na.keypoints[i], nb.keypoints[i]);
    ++shared;
  }
  if (shared < kMinSharedKeypoints) {
    throw Error("pose_distance: fewer than " + std::to_string(kMinSharedKeypoints) +
                " shared visible keypoints");
  }
  return sum / shared;
}

NearestPose nearest_training_pose(const Pose2D& ref, std::span<const Pose2D> pool, int k) {
  if (pool.empty()) throw Error("nearest_training_pose: empty pool");
  if (k < 1) throw Error("nearest_training_pose: k must be >= 1");
  std::vector<double> dists;
  dists.reserve(pool.size());
  NearestPose out;
  double best = std::numeric_limits<double>::infinity();
  (void)normalize_pose(ref);  // reference must be normalisable
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double d;
    try {
      d = pose_distance(ref, pool[i]);
    } catch (const Error&) {
      continue;  // unusable pool entry
    }
    dists.push_back(d);
    if (d < best) {
      best = d;
      out.index = i;
    }
  }
  if (dists.empty()) throw Error("nearest_training_pose: no comparable pose in pool");
  std::size_t kk = static_cast<std::size_t>(k);
  if (kk > dists.size()) {
    log::warn("nearest_training_pose: k=" + std::to_string(k) + " exceeds usable pool size " +
              std::to_string(dists.size()) + "; using full pool");
    kk = dists.size();
  }
  std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(kk), dists.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < kk; ++i) acc += dists[i];
  out.distance = best;
  out.novelty = acc / static_cast<double>(kk);
  out.k_used = kk;
  return out;
}

void complete_derived_keypoints(Pose2D& pose) {
  auto fill = [&](Keypoint target, Keypoint l, Keypoint r) {
    if (pose.is_visible(target) || !pose.is_visible(l) || !pose.is_visible(r)) return;
    pose[target] = 0.5 * (pose[l] + pose[r]);
    pose.visible[static_cast<int>(target)] = true;
  };
  fill(Keypoint::kNeck, Keypoint::kLShoulder, Keypoint::kRShoulder);
  fill(Keypoint::kMidHip, Keypoint::kLHip, Keypoint::kRHip);
}

}  // namespace mxf
