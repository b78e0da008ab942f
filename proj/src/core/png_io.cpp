#include "motionxfer/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace mxf {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw Error(std::string("libpng: ") + msg); }
void png_quiet(png_structp, png_const_charp) {}

// rows: height rows of width*channels bytes.
void write_rows(const std::filesystem::path& path, int width, int height, int channels,
                const std::vector<std::uint8_t>& bytes) {
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_end(png, nullptr);
}

struct Decoded {
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded read_rows(const std::filesystem::path& path, bool gray) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_quiet);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_read_info(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  const auto color = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (gray) {
    if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
  } else if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.bytes.resize(static_cast<std::size_t>(d.width) * d.height * d.channels);
  std::vector<png_bytep> rows(d.height);
  for (int y = 0; y < d.height; ++y) {
    rows[y] = d.bytes.data() + static_cast<std::size_t>(y) * d.width * d.channels;
  }
  png_read_image(png, rows.data());
  return d;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& rgb) {
  if (rgb.channels() != 3 && rgb.channels() != 1) throw Error("write_png: expected 1 or 3 channels");
  std::vector<std::uint8_t> bytes(rgb.size());
  auto src = rgb.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(src[i]);
  write_rows(path, rgb.width(), rgb.height(), rgb.channels(), bytes);
}

Image read_png(const std::filesystem::path& path) {
  auto d = read_rows(path, false);
  Image out(d.height, d.width, 3);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = from_byte(d.bytes[i]);
  return out;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.data().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data()[i] ? 255 : 0;
  write_rows(path, mask.width(), mask.height(), 1, bytes);
}

Mask read_mask_png(const std::filesystem::path& path) {
  auto d = read_rows(path, true);
  Mask out(d.height, d.width);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = d.bytes[i] >= 128 ? 1 : 0;
  return out;
}

void write_gray_png(const std::filesystem::path& path, const Image& gray, int channel) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(gray.height()) * gray.width());
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) {
      const float v = std::clamp(gray.at(y, x, channel), 0.0f, 1.0f);
      bytes[static_cast<std::size_t>(y) * gray.width() + x] =
          static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  write_rows(path, gray.width(), gray.height(), 1, bytes);
}

}  // namespace mxf
