#include "motionxfer/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "motionxfer/error.hpp"
#include "motionxfer/png_io.hpp"

namespace mxf {

double RasterConfig::resolved_sigma(int height, int width) const {
  return sigma > 0.0 ? sigma : 0.02 * std::max(height, width);
}

double RasterConfig::resolved_landmark_sigma(int height, int width) const {
  return landmark_sigma > 0.0 ? landmark_sigma : resolved_sigma(height, width);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image part_shape_mask(const PartSegment& s, int height, int width, double rect_width) {
  Image mask(height, width, 1);
  const Point2 mid = 0.5 * (s.proximal + s.distal);
  const double len = s.length();
  if (s.part == Part::kHead) {
    const double r = 0.5 * len;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (distance({double(x), double(y)}, mid) <= r) mask.at(y, x) = 1.0f;
    return mask;
  }
  const double ux = (s.distal.x - s.proximal.x) / len;
  const double uy = (s.distal.y - s.proximal.y) / len;
  const double half_len = 0.5 * len, half_w = 0.5 * rect_width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - mid.x, dy = y - mid.y;
      const double along = dx * ux + dy * uy;
      const double across = -dx * uy + dy * ux;
      if (std::abs(along) <= half_len && std::abs(across) <= half_w) mask.at(y, x) = 1.0f;
    }
  }
  return mask;
}

Image gaussian_blur(const Image& channel, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = channel.height(), w = channel.width(), nc = channel.channels();
  std::vector<double> tmp(static_cast<std::size_t>(h) * w * nc, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          const int xx = x + i;
          if (xx >= 0 && xx < w) acc += k[i + r] * channel.at(y, xx, c);
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * nc + c] = acc;
      }
  Image out(h, w, nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          const int yy = y + i;
          if (yy >= 0 && yy < h) acc += k[i + r] * tmp[(static_cast<std::size_t>(yy) * w + x) * nc + c];
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

namespace {

void rescale_peak(Image& grid) {
  float peak = 0.0f;
  for (float v : grid.data()) peak = std::max(peak, v);
  if (peak <= 0.0f) return;
  for (auto& v : grid.data()) v = std::clamp(v / peak, 0.0f, 1.0f);
}

bool shape_clipped(const PartSegment& s, int height, int width, double rect_width) {
  // Conservative bound: bone endpoints padded by the shape half-extent.
  const double pad = s.part == Part::kHead ? 0.5 * s.length() : 0.5 * rect_width;
  auto outside = [&](Point2 p) {
    return p.x - pad < 0 || p.y - pad < 0 || p.x + pad > width - 1 || p.y + pad > height - 1;
  };
  if (s.part == Part::kHead) return outside(0.5 * (s.proximal + s.distal));
  return outside(s.proximal) || outside(s.distal);
}

}  // namespace

RasterChannel rasterize_part_channel(const PartSegment& segment, int height, int width,
                                     double rect_width, double sigma) {
  if (segment.length() <= kMinSegmentLength) {
    throw Error("rasterize_part_channel: degenerate segment for " +
                std::string(part_name(segment.part)));
  }
  if (!(rect_width > 0.0) || !(sigma > 0.0)) {
    throw Error("rasterize_part_channel: width and sigma must be positive");
  }
  RasterChannel out;
  out.clipped = shape_clipped(segment, height, width, rect_width);
  out.grid = gaussian_blur(part_shape_mask(segment, height, width, rect_width), sigma);
  rescale_peak(out.grid);
  return out;
}

Image rasterize_landmark_channel(std::span<const Point2> points, int height, int width,
                                 double sigma) {
  Image out(height, width, 1);
  if (points.empty()) return out;
  if (!(sigma > 0.0)) throw Error("rasterize_landmark_channel: sigma must be positive");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double best = 0.0;
      for (const auto& p : points) {
        const double dx = x - p.x, dy = y - p.y;
        best = std::max(best, std::exp(-(dx * dx + dy * dy) * inv));
      }
      out.at(y, x) = static_cast<float>(best);
    }
  rescale_peak(out);
  return out;
}

PoseVolume build_pose_volume(const Pose2D& pose, int height, int width, const RasterConfig& cfg) {
  PoseVolume vol;
  vol.grid = Image(height, width, kPoseChannels);
  const double sigma = cfg.resolved_sigma(height, width);
  const auto segments = part_segments(pose);
  for (int i = 0; i < kNumParts; ++i) {
    const auto& s = segments[i];
    if (s.missing) continue;
    const double rw = std::max(cfg.min_width, cfg.width_ratio * s.length());
    auto ch = rasterize_part_channel(s, height, width, rw, sigma);
    if (ch.clipped) vol.clipped_parts.push_back(s.part);
    vol.grid.set_channels(i, ch.grid);
  }
  const double lsigma = cfg.resolved_landmark_sigma(height, width);
  for (int l = 0; l < kNumLandmarkSets; ++l) {
    const auto lm = static_cast<Landmark>(l);
    if (!pose.is_visible(landmark_parent(lm))) continue;
    vol.grid.set_channels(kNumParts + l,
                          rasterize_landmark_channel(pose.landmark(lm), height, width, lsigma));
  }
  return vol;
}

StackedPoseVolume stack_temporal(std::span<const PoseVolume> history, int k) {
  if (history.empty()) throw Error("stack_temporal: empty history");
  if (k < 1) throw Error("stack_temporal: K must be >= 1");
  if (history.size() > static_cast<std::size_t>(k)) {
    throw Error("stack_temporal: history longer than K");
  }
  const auto& first = history.front().grid;
  StackedPoseVolume out;
  out.history = k;
  out.grid = Image(first.height(), first.width(), kPoseChannels * k);
  const int pad = k - static_cast<int>(history.size());
  for (int slot = 0; slot < k; ++slot) {
    const auto& src = history[static_cast<std::size_t>(std::max(0, slot - pad))].grid;
    if (!src.same_shape(first)) throw Error("stack_temporal: volume shape mismatch");
    out.grid.set_channels(slot * kPoseChannels, src);
  }
  return out;
}

void dump_pose_channels(const std::filesystem::path& dir, int frame, const Image& volume) {
  std::filesystem::create_directories(dir);
  char name[48];
  for (int c = 0; c < volume.channels(); ++c) {
    std::snprintf(name, sizeof name, "%06d_%02d.png", frame, c);
    write_gray_png(dir / name, volume, c);
  }
}

}  // namespace mxf
