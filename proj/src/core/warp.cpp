#include "motionxfer/warp.hpp"

#include <cmath>
#include <cstdio>

#include "motionxfer/error.hpp"
#include "motionxfer/png_io.hpp"

namespace mxf {

SamplingGrid affine_grid(const AffineMatrix& m, int height, int width) {
  const AffineMatrix inv = m.inverse();
  SamplingGrid g(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const Point2 s = inv.apply({double(c), double(r)});
      g.x(r, c) = s.x;
      g.y(r, c) = s.y;
    }
  return g;
}

namespace {

struct Taps {
  int x0, y0;
  double wx, wy;  // fractional offsets toward x0+1, y0+1
};

Taps taps_for(double sx, double sy) {
  const double fx = std::floor(sx), fy = std::floor(sy);
  return {static_cast<int>(fx), static_cast<int>(fy), sx - fx, sy - fy};
}

// Coordinates this far out cannot touch the image; also keeps the int casts sane.
bool far_outside(double sx, double sy, int h, int w) {
  return !(sx > -1.0 && sy > -1.0 && sx < w && sy < h);
}

double pixel_or_fill(const Image& img, int y, int x, int c, float fill) {
  if (y < 0 || x < 0 || y >= img.height() || x >= img.width()) return fill;
  return img.at(y, x, c);
}

}  // namespace

Image bilinear_sample(const Image& image, const SamplingGrid& grid, float fill) {
  Image out(grid.height, grid.width, image.channels(), fill);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const double sx = grid.x(r, c), sy = grid.y(r, c);
      if (!std::isfinite(sx) || !std::isfinite(sy) || far_outside(sx, sy, image.height(), image.width())) {
        continue;
      }
      const Taps t = taps_for(sx, sy);
      for (int ch = 0; ch < image.channels(); ++ch) {
        const double v00 = pixel_or_fill(image, t.y0, t.x0, ch, fill);
        const double v01 = pixel_or_fill(image, t.y0, t.x0 + 1, ch, fill);
        const double v10 = pixel_or_fill(image, t.y0 + 1, t.x0, ch, fill);
        const double v11 = pixel_or_fill(image, t.y0 + 1, t.x0 + 1, ch, fill);
        const double top = v00 + t.wx * (v01 - v00);
        const double bot = v10 + t.wx * (v11 - v10);
        out.at(r, c, ch) = static_cast<float>(top + t.wy * (bot - top));
      }
    }
  }
  return out;
}

SampleGradients bilinear_sample_backward(const Image& image, const SamplingGrid& grid,
                                         const Image& grad_output, float fill) {
  if (!grad_output.same_extent(grid.height, grid.width) ||
      grad_output.channels() != image.channels()) {
    throw Error("bilinear_sample_backward: grad_output shape mismatch");
  }
  SampleGradients g{Image(image.height(), image.width(), image.channels()),
                    SamplingGrid(grid.height, grid.width)};
  auto add_image = [&](int y, int x, int ch, double v) {
    if (y < 0 || x < 0 || y >= image.height() || x >= image.width()) return;
    g.image.at(y, x, ch) += static_cast<float>(v);
  };
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const double sx = grid.x(r, c), sy = grid.y(r, c);
      if (!std::isfinite(sx) || !std::isfinite(sy) || far_outside(sx, sy, image.height(), image.width())) {
        continue;
      }
      const Taps t = taps_for(sx, sy);
      double gx = 0.0, gy = 0.0;
      for (int ch = 0; ch < image.channels(); ++ch) {
        const double go = grad_output.at(r, c, ch);
        const double v00 = pixel_or_fill(image, t.y0, t.x0, ch, fill);
        const double v01 = pixel_or_fill(image, t.y0, t.x0 + 1, ch, fill);
        const double v10 = pixel_or_fill(image, t.y0 + 1, t.x0, ch, fill);
        const double v11 = pixel_or_fill(image, t.y0 + 1, t.x0 + 1, ch, fill);
        gx += go * ((1 - t.wy) * (v01 - v00) + t.wy * (v11 - v10));
        gy += go * ((1 - t.wx) * (v10 - v00) + t.wx * (v11 - v01));
        add_image(t.y0, t.x0, ch, go * (1 - t.wx) * (1 - t.wy));
        add_image(t.y0, t.x0 + 1, ch, go * t.wx * (1 - t.wy));
        add_image(t.y0 + 1, t.x0, ch, go * (1 - t.wx) * t.wy);
        add_image(t.y0 + 1, t.x0 + 1, ch, go * t.wx * t.wy);
      }
      g.grid.x(r, c) = gx;
      g.grid.y(r, c) = gy;
    }
  }
  return g;
}

Image warp_part(const Image& input, const Mask& mask, const AffineMatrix& m, float fill) {
  if (!mask.same_extent(input.height(), input.width())) throw Error("warp_part: mask extent mismatch");
  Image masked = input;
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      if (!mask.at(y, x))
        for (int c = 0; c < input.channels(); ++c) masked.at(y, x, c) = fill;
  return bilinear_sample(masked, affine_grid(m, input.height(), input.width()), fill);
}

PartsVolume assemble_parts(const Image& input, std::span<const Mask> part_masks,
                           const PartTransformSet& transforms, float fill) {
  if (input.channels() != 3) throw Error("assemble_parts: input must have 3 channels");
  if (part_masks.size() != static_cast<std::size_t>(kNumParts)) {
    throw Error("assemble_parts: expected 10 part masks");
  }
  PartsVolume out{Image(input.height(), input.width(), kPartsChannels, fill)};
  for (int i = 0; i < kNumParts; ++i) {
    if (transforms.missing[i]) continue;
    const auto& m = transforms.transforms[i];
    if (!std::isfinite(m.determinant()) || !(m.determinant() > 0.0)) {
      throw Error("assemble_parts: invalid transform for " +
                  std::string(part_name(static_cast<Part>(i))));
    }
    out.grid.set_channels(3 * i, warp_part(input, part_masks[i], m, fill));
  }
  return out;
}

void dump_part_crops(const std::filesystem::path& dir, int frame, const PartsVolume& parts) {
  std::filesystem::create_directories(dir);
  char name[48];
  for (int p = 0; p < kNumParts; ++p) {
    std::snprintf(name, sizeof name, "%06d_part%02d.png", frame, p);
    write_png(dir / name, parts.grid.channel_slice(3 * p, 3));
  }
}

}  // namespace mxf
