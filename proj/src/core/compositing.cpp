#include "motionxfer/compositing.hpp"

#include <cmath>

#include "motionxfer/error.hpp"
#include "motionxfer/heatmap.hpp"

namespace mxf {

void ChromaKeyConfig::validate() const {
  // Largest possible distance inside the [-1, 1] cube.
  const float max_dist = 2.0f * std::sqrt(3.0f);
  if (!(threshold > 0.0f && threshold < max_dist)) throw Error("ChromaKeyConfig: threshold out of range");
  if (cleanup_radius < 0) throw Error("ChromaKeyConfig: negative cleanup radius");
}

Mask extract_foreground_mask(const Image& img, const ChromaKeyConfig& ck) {
  ck.validate();
  if (img.channels() != 3) throw Error("extract_foreground_mask: expected 3 channels");
  Mask out(img.height(), img.width());
  const float t2 = ck.threshold * ck.threshold;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      float d2 = 0.0f;
      for (int c = 0; c < 3; ++c) {
        const float d = img.at(y, x, c) - ck.key[c];
        d2 += d * d;
      }
      out.at(y, x) = d2 > t2 ? 1 : 0;
    }
  return out;
}

Mask foreground_mask_for_composite(const Image& img, const ChromaKeyConfig& ck) {
  Mask m = extract_foreground_mask(img, ck);
  return ck.cleanup_radius > 0 ? open(m, ck.cleanup_radius) : m;
}

Image composite(const Image& fg, const Mask& mask, const Image& bg) {
  if (!fg.same_shape(bg) || !mask.same_extent(fg.height(), fg.width())) {
    throw Error("composite: shape mismatch");
  }
  Image out = bg;
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x)
      if (mask.at(y, x))
        for (int c = 0; c < fg.channels(); ++c) out.at(y, x, c) = fg.at(y, x, c);
  return out;
}

Image over_green(const Image& fg, const Mask& mask, const ChromaKeyConfig& ck) {
  Image green(fg.height(), fg.width(), 3);
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x)
      for (int c = 0; c < 3; ++c) green.at(y, x, c) = ck.key[c];
  return composite(fg, mask, green);
}

Mask boundary_band(const Mask& mask, int radius) {
  const Mask grown = dilate(mask, radius);
  const Mask shrunk = erode(mask, radius);
  Mask band(mask.height(), mask.width());
  for (std::size_t i = 0; i < band.data().size(); ++i) {
    band.data()[i] = grown.data()[i] && !shrunk.data()[i] ? 1 : 0;
  }
  return band;
}

Image recomposite(const Image& fg, const Mask& mask, const Image& background, const BlendConfig& cfg) {
  const Image bg = resize_bilinear(background, fg.height(), fg.width());
  if (!bg.same_shape(fg) || !mask.same_extent(fg.height(), fg.width())) {
    throw Error("recomposite: size mismatch after resize");
  }
  if (!cfg.blur) return composite(fg, mask, bg);
  const Mask band = boundary_band(mask, cfg.band);
  Image alpha(mask.height(), mask.width(), 1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) alpha.at(y, x) = mask.at(y, x) ? 1.0f : 0.0f;
  const Image soft = gaussian_blur(alpha, cfg.sigma);
  Image out = bg;
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x) {
      const float a = band.at(y, x) ? soft.at(y, x) : alpha.at(y, x);
      for (int c = 0; c < fg.channels(); ++c) out.at(y, x, c) = a * fg.at(y, x, c) + (1.0f - a) * bg.at(y, x, c);
    }
  return out;
}

}  // namespace mxf
