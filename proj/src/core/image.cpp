#include "motionxfer/image.hpp"

#include <algorithm>
#include <cmath>

namespace mxf {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw Error("Image: negative extent");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::channel_slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > channels_) {
    throw Error("Image::channel_slice: range out of bounds");
  }
  Image out(height_, width_, count);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < count; ++c) out.at(y, x, c) = at(y, x, first + c);
  return out;
}

void Image::set_channels(int first, const Image& src) {
  if (!src.same_extent(height_, width_) || first < 0 ||
      first + src.channels() > channels_) {
    throw Error("Image::set_channels: shape mismatch");
  }
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      for (int c = 0; c < src.channels(); ++c) at(y, x, first + c) = src.at(y, x, c);
}

Mask::Mask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw Error("Mask: negative extent");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask mask_union(std::span<const Mask> masks) {
  if (masks.empty()) return {};
  Mask out(masks.front().height(), masks.front().width());
  for (const auto& m : masks) {
    if (!m.same_extent(out.height(), out.width())) throw Error("mask_union: extent mismatch");
    auto dst = out.data();
    auto src = m.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = dst[i] | src[i];
  }
  return out;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_extent(b.height(), b.width())) throw Error("mask_iou: extent mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    inter += a.data()[i] & b.data()[i];
    uni += a.data()[i] | b.data()[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Pixels outside the frame are treated as background for both operators.
Mask morph(const Mask& m, int radius, bool erode_op) {
  Mask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool acc = erode_op;
      for (int dy = -radius; dy <= radius && acc == erode_op; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int yy = y + dy, xx = x + dx;
          const bool v = yy >= 0 && yy < m.height() && xx >= 0 && xx < m.width() &&
                         m.at(yy, xx) != 0;
          if (erode_op && !v) {
            acc = false;
            break;
          }
          if (!erode_op && v) {
            acc = true;
            break;
          }
        }
      }
      out.at(y, x) = acc ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

Mask erode(const Mask& m, int radius) { return morph(m, radius, true); }
Mask dilate(const Mask& m, int radius) { return morph(m, radius, false); }
Mask open(const Mask& m, int radius) { return dilate(erode(m, radius), radius); }

std::uint8_t to_byte(float v) noexcept {
  const float s = std::round((v + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(std::clamp(s, 0.0f, 255.0f));
}

float from_byte(std::uint8_t b) noexcept { return static_cast<float>(b) / 127.5f - 1.0f; }

Image to_byte_scale(const Image& image) {
  Image out = image;
  for (auto& v : out.data()) v = (v + 1.0f) * 127.5f;
  return out;
}

Image quantize(const Image& image) {
  Image out = image;
  for (auto& v : out.data()) v = from_byte(to_byte(v));
  return out;
}

Image downsample(const Image& image, int factor) {
  if (factor < 1 || image.height() % factor != 0 || image.width() % factor != 0) {
    throw Error("downsample: extent not divisible by factor");
  }
  if (factor == 1) return image;
  const int h = image.height() / factor, w = image.width() / factor;
  Image out(h, w, image.channels());
  const float norm = 1.0f / static_cast<float>(factor * factor);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < image.channels(); ++c) {
        float acc = 0.0f;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            acc += image.at(y * factor + dy, x * factor + dx, c);
        out.at(y, x, c) = acc * norm;
      }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.same_extent(height, width)) return image;
  Image out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bot = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, int height, int width) {
  if (mask.same_extent(height, width)) return mask;
  Mask out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int sy = std::min(mask.height() - 1, y * mask.height() / height);
      const int sx = std::min(mask.width() - 1, x * mask.width() / width);
      out.at(y, x) = mask.at(sy, sx);
    }
  return out;
}

}  // namespace mxf
