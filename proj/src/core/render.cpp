#include "motionxfer/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "motionxfer/error.hpp"

namespace mxf {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bit-level uniform draw so sequences do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 gen_;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

using Rgb = std::array<float, 3>;

// Joint-angle oscillators; each angle is base + sum of two sines.
struct Oscillator {
  double base = 0.0;
  std::array<double, 2> amp{}, freq{}, phase{};

  double at(double t) const {
    double v = base;
    for (int i = 0; i < 2; ++i) v += amp[i] * std::sin(kTwoPi * freq[i] * t + phase[i]);
    return v;
  }
  double max_rate() const {
    double r = 0.0;
    for (int i = 0; i < 2; ++i) r += std::abs(amp[i]) * kTwoPi * freq[i];
    return r;
  }
};

enum Angle : int {
  kTorsoLean,
  kLUpperArmA,
  kRUpperArmA,
  kLElbowA,
  kRElbowA,
  kLUpperLegA,
  kRUpperLegA,
  kLKneeA,
  kRKneeA,
  kRootX,
  kRootY,
  kNumAngles
};

// Body proportions as fractions of frame height.
struct Proportions {
  double torso = 0.22, neck_to_nose = 0.085, shoulder_half = 0.065, hip_half = 0.045;
  double upper_arm = 0.13, lower_arm = 0.12, upper_leg = 0.16, lower_leg = 0.15;
  double arm_radius = 0.028, leg_radius = 0.038, torso_half_width = 0.068;
  double head_rx = 0.055, head_ry = 0.065, hand_radius = 0.024, foot_len = 0.045;
  double root_y = 0.52;
};

struct MotionScript {
  std::array<Oscillator, kNumAngles> osc;
};

MotionScript make_motion(const SceneConfig& cfg) {
  Rng rng(mix(cfg.motion_seed, 0xA11CEull));
  MotionScript s;
  const double a = cfg.motion_amplitude;
  auto make = [&](double base, double amp) {
    Oscillator o;
    o.base = base;
    for (int i = 0; i < 2; ++i) {
      o.amp[i] = a * amp * rng.uniform(0.3, 1.0) / (i + 1);
      o.freq[i] = rng.uniform(1.0 / 60.0, 1.0 / 20.0) * (i + 1);
      o.phase[i] = rng.uniform(0.0, kTwoPi);
    }
    return o;
  };
  s.osc[kTorsoLean] = make(0.0, 0.12);
  s.osc[kLUpperArmA] = make(-0.5, 0.9);
  s.osc[kRUpperArmA] = make(0.5, 0.9);
  s.osc[kLElbowA] = make(-0.5, 0.7);
  s.osc[kRElbowA] = make(0.5, 0.7);
  s.osc[kLUpperLegA] = make(-0.15, 0.35);
  s.osc[kRUpperLegA] = make(0.15, 0.35);
  s.osc[kLKneeA] = make(0.25, 0.25);
  s.osc[kRKneeA] = make(-0.25, 0.25);
  s.osc[kRootX] = make(0.0, 0.09);  // fraction of width
  s.osc[kRootY] = make(0.0, 0.015);
  return s;
}

// Angle 0 points straight down in image coordinates (y grows downward).
Point2 dir(double angle) { return {std::sin(angle), std::cos(angle)}; }

struct Skeleton {
  Pose2D pose;  // every keypoint marked visible, landmarks filled
  std::array<PartSegment, kNumParts> bones;
  Point2 l_toe, r_toe, l_hand, r_hand;
};

Skeleton pose_at(const SceneConfig& cfg, const MotionScript& m, int frame) {
  const double H = cfg.height, W = cfg.width, t = frame;
  const Proportions pr;
  Skeleton sk;
  Pose2D& p = sk.pose;
  using K = Keypoint;
  const Point2 root{W * (0.5 + m.osc[kRootX].at(t)), H * (pr.root_y + m.osc[kRootY].at(t))};
  const double lean = m.osc[kTorsoLean].at(t);
  const Point2 up{std::sin(lean), -std::cos(lean)};
  const Point2 side{-up.y, up.x};  // perpendicular, toward image right when upright
  p[K::kMidHip] = root;
  p[K::kNeck] = root + (H * pr.torso) * up;
  p[K::kNose] = p[K::kNeck] + (H * pr.neck_to_nose) * up;
  p[K::kLShoulder] = p[K::kNeck] + (H * pr.shoulder_half) * side;
  p[K::kRShoulder] = p[K::kNeck] - (H * pr.shoulder_half) * side;
  p[K::kLHip] = root + (H * pr.hip_half) * side;
  p[K::kRHip] = root - (H * pr.hip_half) * side;

  const double lua = lean - m.osc[kLUpperArmA].at(t);
  const double rua = lean - m.osc[kRUpperArmA].at(t);
  p[K::kLElbow] = p[K::kLShoulder] + (H * pr.upper_arm) * dir(lua);
  p[K::kRElbow] = p[K::kRShoulder] + (H * pr.upper_arm) * dir(rua);
  const double lla = lua - m.osc[kLElbowA].at(t);
  const double rla = rua - m.osc[kRElbowA].at(t);
  p[K::kLWrist] = p[K::kLElbow] + (H * pr.lower_arm) * dir(lla);
  p[K::kRWrist] = p[K::kRElbow] + (H * pr.lower_arm) * dir(rla);

  const double lul = lean - m.osc[kLUpperLegA].at(t);
  const double rul = lean - m.osc[kRUpperLegA].at(t);
  p[K::kLKnee] = p[K::kLHip] + (H * pr.upper_leg) * dir(lul);
  p[K::kRKnee] = p[K::kRHip] + (H * pr.upper_leg) * dir(rul);
  const double lll = lul - m.osc[kLKneeA].at(t);
  const double rll = rul - m.osc[kRKneeA].at(t);
  p[K::kLAnkle] = p[K::kLKnee] + (H * pr.lower_leg) * dir(lll);
  p[K::kRAnkle] = p[K::kRKnee] + (H * pr.lower_leg) * dir(rll);
  p.visible.fill(true);

  sk.l_hand = p[K::kLWrist] + (H * pr.hand_radius) * dir(lla);
  sk.r_hand = p[K::kRWrist] + (H * pr.hand_radius) * dir(rla);
  sk.l_toe = p[K::kLAnkle] + (H * pr.foot_len) * side;
  sk.r_toe = p[K::kRAnkle] - (H * pr.foot_len) * side;

  const Point2 nose = p[K::kNose];
  const double e = H * 0.024;
  p.landmarks[static_cast<int>(Landmark::kFace)] = {
      nose + e * side + (0.6 * e) * up, nose - e * side + (0.6 * e) * up, nose,
      nose - (1.1 * e) * up};
  p.landmarks[static_cast<int>(Landmark::kLHand)] = {p[K::kLWrist], sk.l_hand};
  p.landmarks[static_cast<int>(Landmark::kRHand)] = {p[K::kRWrist], sk.r_hand};
  p.landmarks[static_cast<int>(Landmark::kLFoot)] = {p[K::kLAnkle], sk.l_toe};
  p.landmarks[static_cast<int>(Landmark::kRFoot)] = {p[K::kRAnkle], sk.r_toe};

  // Internal bone table, built from the joint table rather than the pose API.
  const std::array<std::pair<K, K>, kNumParts> joints = {{{K::kNose, K::kNeck},
                                                          {K::kNeck, K::kMidHip},
                                                          {K::kLShoulder, K::kLElbow},
                                                          {K::kRShoulder, K::kRElbow},
                                                          {K::kLElbow, K::kLWrist},
                                                          {K::kRElbow, K::kRWrist},
                                                          {K::kLHip, K::kLKnee},
                                                          {K::kRHip, K::kRKnee},
                                                          {K::kLKnee, K::kLAnkle},
                                                          {K::kRKnee, K::kRAnkle}}};
  for (int i = 0; i < kNumParts; ++i) {
    sk.bones[i].part = static_cast<Part>(i);
    sk.bones[i].proximal = p.keypoints[static_cast<int>(joints[i].first)];
    sk.bones[i].distal = p.keypoints[static_cast<int>(joints[i].second)];
  }
  return sk;
}

double seg_dist(Point2 q, Point2 a, Point2 b) {
  const Point2 ab = b - a, aq = q - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double s = len2 > 0 ? std::clamp((aq.x * ab.x + aq.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return distance(q, a + s * ab);
}

struct Appearance {
  std::array<Rgb, kNumParts> base{};
  std::array<Rgb, kNumParts> accent{};
  std::array<double, kNumParts> stripe_period{};
  Rgb bg_top{}, bg_floor{};
  std::array<Rgb, 3> bg_blocks{};
  std::array<std::array<double, 4>, 3> bg_rects{};  // x0, y0, x1, y1 as fractions
  Rgb distractor{};
};

double green_distance(const Rgb& c) {
  return std::sqrt((c[0] + 1) * (c[0] + 1) + (c[1] - 1) * (c[1] - 1) + (c[2] + 1) * (c[2] + 1));
}

Rgb figure_color(Rng& rng) {
  for (;;) {
    Rgb c{float(rng.uniform(-0.8, 0.8)), float(rng.uniform(-0.8, 0.5)), float(rng.uniform(-0.8, 0.8))};
    if (green_distance(c) > 1.1) return c;
  }
}

Appearance make_appearance(const SceneConfig& cfg, std::uint64_t seed) {
  Rng rng(mix(cfg.appearance_seed, 0xC0105ull));
  Appearance a;
  const Rgb skin = figure_color(rng), shirt = figure_color(rng), pants = figure_color(rng);
  const Rgb shirt2 = figure_color(rng);
  for (int i = 0; i < kNumParts; ++i) {
    const auto part = static_cast<Part>(i);
    switch (part) {
      case Part::kHead:
      case Part::kLLowerArm:
      case Part::kRLowerArm: a.base[i] = skin; break;
      case Part::kTorso:
      case Part::kLUpperArm:
      case Part::kRUpperArm: a.base[i] = shirt; break;
      default: a.base[i] = pants; break;
    }
    a.accent[i] = part == Part::kTorso ? shirt2 : a.base[i];
    // Small per-part tint so left/right limbs stay distinguishable.
    const float tint = static_cast<float>(rng.uniform(-0.12, 0.12));
    for (auto& v : a.base[i]) v = std::clamp(v + tint, -0.9f, 0.9f);
    a.stripe_period[i] = rng.uniform(4.0, 7.0);
  }
  Rng bg(mix(seed, mix(cfg.appearance_seed, 0xB6ull)));
  a.bg_top = {float(bg.uniform(-0.2, 0.6)), float(bg.uniform(-0.2, 0.6)), float(bg.uniform(-0.2, 0.6))};
  a.bg_floor = {float(bg.uniform(-0.6, 0.1)), float(bg.uniform(-0.6, 0.1)), float(bg.uniform(-0.6, 0.1))};
  for (int i = 0; i < 3; ++i) {
    a.bg_blocks[i] = {float(bg.uniform(-0.9, 0.9)), float(bg.uniform(-0.9, 0.9)), float(bg.uniform(-0.9, 0.9))};
    const double x0 = bg.uniform(0.0, 0.8), y0 = bg.uniform(0.05, 0.55);
    a.bg_rects[i] = {x0, y0, x0 + bg.uniform(0.08, 0.25), y0 + bg.uniform(0.08, 0.25)};
  }
  a.distractor = {float(bg.uniform(-0.9, 0.9)), float(bg.uniform(-0.9, 0.9)), float(bg.uniform(-0.9, 0.9))};
  return a;
}

constexpr double kFloorLine = 0.78;

Rgb background_pixel(const SceneConfig& cfg, const Appearance& a, int t, int px, int py) {
  const double H = cfg.height, W = cfg.width;
  double x = px, y = py;
  if (cfg.background == BackgroundStyle::kDriftingTexture) x += 0.35 * t;
  const double fy = y / H;
  Rgb c;
  if (fy < kFloorLine) {
    for (int k = 0; k < 3; ++k) c[k] = static_cast<float>(a.bg_top[k] * (1.0 - 0.4 * fy));
  } else {
    c = a.bg_floor;
  }
  for (int i = 0; i < 3; ++i) {
    const auto& r = a.bg_rects[i];
    double fx = x / W;
    if (cfg.background == BackgroundStyle::kDriftingTexture) fx -= std::floor(fx);
    if (fx >= r[0] && fx < r[2] && fy >= r[1] && fy < r[3]) c = a.bg_blocks[i];
  }
  // Fine deterministic texture.
  const double tex = 0.04 * std::sin(0.9 * x + 0.3 * y) * std::cos(0.7 * y - 0.2 * x);
  for (auto& v : c) v = static_cast<float>(std::clamp(v + tex, -1.0, 1.0));
  if (cfg.background == BackgroundStyle::kMovingDistractor) {
    const double cx = std::fmod(0.6 * t, W + 20.0) - 10.0;
    const double cy = 0.25 * H + 0.06 * H * std::sin(0.1 * t);
    if (std::hypot(x - cx, y - cy) < 0.08 * H) c = a.distractor;
  }
  return c;
}

// Painter's order, back to front.
constexpr std::array<Part, kNumParts> kDepthOrder = {
    Part::kRUpperArm, Part::kRLowerArm, Part::kRUpperLeg, Part::kRLowerLeg, Part::kLUpperLeg,
    Part::kLLowerLeg, Part::kTorso,     Part::kHead,      Part::kLUpperArm, Part::kLLowerArm};

bool inside_part(const Skeleton& sk, Part part, Point2 q, double H) {
  const Proportions pr;
  const auto& b = sk.bones[static_cast<int>(part)];
  switch (part) {
    case Part::kHead: {
      const Point2 c = b.proximal;  // nose sits at the head centre
      const Point2 up = (1.0 / b.length()) * (b.proximal - b.distal);
      const Point2 d = q - c;
      const double v = d.x * up.x + d.y * up.y;
      const double u = -d.x * up.y + d.y * up.x;
      const double rx = H * pr.head_rx, ry = H * pr.head_ry;
      return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
    }
    case Part::kTorso: {
      const Point2 mid = 0.5 * (b.proximal + b.distal);
      const double len = b.length();
      const Point2 ax = (1.0 / len) * (b.distal - b.proximal);
      const Point2 d = q - mid;
      const double along = d.x * ax.x + d.y * ax.y;
      const double across = -d.x * ax.y + d.y * ax.x;
      return std::abs(along) <= 0.5 * len + 0.01 * H && std::abs(across) <= H * pr.torso_half_width;
    }
    case Part::kLLowerArm:
    case Part::kRLowerArm: {
      const Point2 hand = part == Part::kLLowerArm ? sk.l_hand : sk.r_hand;
      return seg_dist(q, b.proximal, b.distal) <= H * pr.arm_radius ||
             distance(q, hand) <= H * pr.hand_radius;
    }
    case Part::kLUpperArm:
    case Part::kRUpperArm: return seg_dist(q, b.proximal, b.distal) <= H * pr.arm_radius;
    case Part::kLLowerLeg:
    case Part::kRLowerLeg: {
      const Point2 toe = part == Part::kLLowerLeg ? sk.l_toe : sk.r_toe;
      return seg_dist(q, b.proximal, b.distal) <= H * pr.leg_radius ||
             seg_dist(q, b.distal, toe) <= H * 0.022;
    }
    case Part::kLUpperLeg:
    case Part::kRUpperLeg: return seg_dist(q, b.proximal, b.distal) <= H * pr.leg_radius;
  }
  return false;
}

Rgb part_pixel(const Appearance& a, const Skeleton& sk, Part part, Point2 q) {
  const int i = static_cast<int>(part);
  const auto& b = sk.bones[i];
  const Point2 ax = (1.0 / b.length()) * (b.distal - b.proximal);
  const Point2 d = q - b.proximal;
  const double along = d.x * ax.x + d.y * ax.y;
  const bool stripe = std::fmod(std::abs(along), a.stripe_period[i]) < 0.5 * a.stripe_period[i];
  Rgb c = stripe ? a.accent[i] : a.base[i];
  // Shade across the limb for some volume.
  const double across = -d.x * ax.y + d.y * ax.x;
  const float shade = static_cast<float>(-0.05 * std::tanh(across / 3.0));
  for (auto& v : c) v = std::clamp(v + shade, -1.0f, 1.0f);
  return c;
}

}  // namespace

std::string to_string(BackgroundStyle style) {
  switch (style) {
    case BackgroundStyle::kStatic: return "static";
    case BackgroundStyle::kDriftingTexture: return "drifting_texture";
    case BackgroundStyle::kMovingDistractor: return "moving_distractor";
  }
  return "static";
}

BackgroundStyle background_style_from_string(const std::string& name) {
  if (name == "static") return BackgroundStyle::kStatic;
  if (name == "drifting_texture") return BackgroundStyle::kDriftingTexture;
  if (name == "moving_distractor") return BackgroundStyle::kMovingDistractor;
  throw Error("unknown background style '" + name + "'");
}

void validate_scene_config(const SceneConfig& cfg) {
  if (cfg.height < 32 || cfg.width < 32) throw Error("SceneConfig: H and W must be >= 32");
  if (cfg.history < 1) throw Error("SceneConfig: history K must be >= 1");
  if (cfg.n_frames < 2 * cfg.history) throw Error("SceneConfig: n_frames must be >= 2K");
  if (!(cfg.motion_amplitude >= 0.0)) throw Error("SceneConfig: motion_amplitude must be >= 0");
}

double keypoint_speed_bound(const SceneConfig& cfg) {
  const auto m = make_motion(cfg);
  const Proportions pr;
  const double H = cfg.height, W = cfg.width;
  const double root = W * m.osc[kRootX].max_rate() + H * m.osc[kRootY].max_rate();
  const double lean = m.osc[kTorsoLean].max_rate();
  // Longest lever arm from the root times the summed angular rates along it.
  const double torso_arm = H * (pr.torso + pr.neck_to_nose + pr.shoulder_half);
  double arm = 0.0, leg = 0.0;
  for (auto [u, l] : {std::pair{kLUpperArmA, kLElbowA}, std::pair{kRUpperArmA, kRElbowA}}) {
    const double reach = H * (pr.torso + pr.shoulder_half + pr.upper_arm + pr.lower_arm);
    arm = std::max(arm, reach * lean + H * (pr.upper_arm + pr.lower_arm) * m.osc[u].max_rate() +
                            H * pr.lower_arm * m.osc[l].max_rate());
  }
  for (auto [u, l] : {std::pair{kLUpperLegA, kLKneeA}, std::pair{kRUpperLegA, kRKneeA}}) {
    const double reach = H * (pr.hip_half + pr.upper_leg + pr.lower_leg);
    leg = std::max(leg, reach * lean + H * (pr.upper_leg + pr.lower_leg) * m.osc[u].max_rate() +
                            H * pr.lower_leg * m.osc[l].max_rate());
  }
  return root + std::max({torso_arm * lean, arm, leg});
}

Image render_background(const SceneConfig& cfg, std::uint64_t seed, int t) {
  const auto a = make_appearance(cfg, seed);
  Image out(cfg.height, cfg.width, 3);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      const Rgb c = background_pixel(cfg, a, t, x, y);
      for (int k = 0; k < 3; ++k) out.at(y, x, k) = c[k];
    }
  return out;
}

std::vector<LabeledFrame> generate_video(const SceneConfig& cfg, std::uint64_t seed) {
  validate_scene_config(cfg);
  const auto motion = make_motion(cfg);
  const auto look = make_appearance(cfg, seed);
  const int H = cfg.height, W = cfg.width;
  std::vector<LabeledFrame> video;
  video.reserve(cfg.n_frames);
  int out_of_frame = 0;
  for (int t = 0; t < cfg.n_frames; ++t) {
    const Skeleton sk = pose_at(cfg, motion, t);
    LabeledFrame f;
    f.bones = sk.bones;
    f.pose = sk.pose;
    f.image = render_background(cfg, seed, t);
    for (auto& m : f.part_masks) m = Mask(H, W);
    f.fg_mask = Mask(H, W);

    // Which part owns each pixel after painting back to front.
    std::vector<int> owner(static_cast<std::size_t>(H) * W, -1);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        for (Part part : kDepthOrder)
          if (inside_part(sk, part, {double(x), double(y)}, H)) owner[y * W + x] = static_cast<int>(part);

    if (cfg.shadow) {
      const Point2 la = sk.pose[Keypoint::kLAnkle], ra = sk.pose[Keypoint::kRAnkle];
      const Point2 c{0.5 * (la.x + ra.x), std::max(la.y, ra.y) + 0.015 * H};
      const double rx = 0.13 * H, ry = 0.03 * H;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double u = (x - c.x) / rx, v = (y - c.y) / ry;
          if (u * u + v * v <= 1.0 && owner[y * W + x] < 0)
            for (int k = 0; k < 3; ++k) f.image.at(y, x, k) = (f.image.at(y, x, k) + 1.0f) * 0.55f - 1.0f;
        }
    }

    bool touches_border = false;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const int o = owner[y * W + x];
        if (o < 0) continue;
        const Rgb c = part_pixel(look, sk, static_cast<Part>(o), {double(x), double(y)});
        for (int k = 0; k < 3; ++k) f.image.at(y, x, k) = c[k];
        f.part_masks[o].at(y, x) = 1;
        f.fg_mask.at(y, x) = 1;
        if (x == 0 || y == 0 || x == W - 1 || y == H - 1) touches_border = true;
      }

    // Keypoints outside the frame become invisible; their parts go missing.
    bool kp_outside = false;
    for (int i = 0; i < kNumKeypoints; ++i) {
      const Point2 p = f.pose.keypoints[i];
      if (p.x < 0 || p.y < 0 || p.x >= W || p.y >= H) {
        f.pose.visible[i] = false;
        kp_outside = true;
      }
    }
    for (int l = 0; l < kNumLandmarkSets; ++l)
      if (!f.pose.is_visible(landmark_parent(static_cast<Landmark>(l)))) f.pose.landmarks[l].clear();
    if (touches_border || kp_outside) ++out_of_frame;
    video.push_back(std::move(f));
  }
  if (out_of_frame * 10 > cfg.n_frames) {
    throw Error("generate_video: figure leaves the frame in " + std::to_string(out_of_frame) + " of " +
                std::to_string(cfg.n_frames) + " frames; try a smaller motion_amplitude");
  }
  return video;
}

void fill_holes(Image& image, const Mask& holes, double tol, int max_iters) {
  const int H = image.height(), W = image.width(), C = image.channels();
  std::vector<int> idx;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (holes.at(y, x)) idx.push_back(y * W + x);
  if (idx.empty()) return;
  if (idx.size() == static_cast<std::size_t>(H) * W) return;  // nothing to anchor on
  std::vector<double> cur(image.data().begin(), image.data().end());
  std::vector<double> next = cur;
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (int id : idx) {
      const int y = id / W, x = id % W;
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dy && !dx) continue;
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
            acc += cur[(static_cast<std::size_t>(yy) * W + xx) * C + c];
            ++n;
          }
        const std::size_t k = static_cast<std::size_t>(id) * C + c;
        next[k] = acc / n;
        delta = std::max(delta, std::abs(next[k] - cur[k]));
      }
    }
    std::swap(cur, next);
    if (delta < tol) break;
  }
  auto dst = image.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(cur[i]);
}

Image estimate_background(std::span<const Image> frames, std::span<const Mask> fg_masks) {
  if (frames.empty()) throw Error("estimate_background: no frames");
  if (frames.size() != fg_masks.size()) throw Error("estimate_background: frame/mask count mismatch");
  const int H = frames.front().height(), W = frames.front().width(), C = frames.front().channels();
  std::vector<double> sum(static_cast<std::size_t>(H) * W * C, 0.0);
  std::vector<int> count(static_cast<std::size_t>(H) * W, 0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (!frames[f].same_shape(frames.front()) || !fg_masks[f].same_extent(H, W)) {
      throw Error("estimate_background: shape mismatch");
    }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (fg_masks[f].at(y, x)) continue;
        ++count[y * W + x];
        for (int c = 0; c < C; ++c) sum[(static_cast<std::size_t>(y) * W + x) * C + c] += frames[f].at(y, x, c);
      }
  }
  Image out(H, W, C);
  Mask holes(H, W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int n = count[y * W + x];
      if (n == 0) {
        holes.at(y, x) = 1;
        continue;
      }
      for (int c = 0; c < C; ++c)
        out.at(y, x, c) = static_cast<float>(sum[(static_cast<std::size_t>(y) * W + x) * C + c] / n);
    }
  fill_holes(out, holes);
  return out;
}

}  // namespace mxf
