#pragma once

// Float RGB images in [0,1], interleaved H x W x 3, plus 8-bit PNG io.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "stylesplat/core/errors.hpp"
#include "stylesplat/core/tensor.hpp"

namespace stylesplat {

struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // h*w*3, interleaved, row-major

  Image() = default;
  Image(int h, int w, float fill = 0.0f) : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, fill) {}

  float* px(int y, int x) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const float* px(int y, int x) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  size_t numel() const { return rgb.size(); }

  bool finite() const {
    for (float v : rgb)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

inline uint8_t to_byte(float v) {
  return static_cast<uint8_t>(std::lround(clamp01(v) * 255.0f));
}

// [3,H,W] tensor (planar) <-> interleaved image.
inline Tensor image_to_tensor(const Image& im) {
  const int h = im.height, w = im.width;
  std::vector<float> v(static_cast<size_t>(3) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float* p = im.px(y, x);
      for (int c = 0; c < 3; ++c) v[(static_cast<size_t>(c) * h + y) * w + x] = p[c];
    }
  return Tensor::from({3, h, w}, std::move(v));
}

inline Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw std::invalid_argument("tensor_to_image: need [3,H,W]");
  const int h = t.dim(1), w = t.dim(2);
  Image im(h, w);
  const float* v = t.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float* p = im.px(y, x);
      for (int c = 0; c < 3; ++c) p[c] = v[(static_cast<size_t>(c) * h + y) * w + x];
    }
  return im;
}

inline void save_png(const std::filesystem::path& path, const Image& im) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw DataError("cannot write png: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("png write error: " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, im.width, im.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(im.width) * 3);
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const float* p = im.px(y, x);
      row[static_cast<size_t>(x) * 3 + 0] = to_byte(p[0]);
      row[static_cast<size_t>(x) * 3 + 1] = to_byte(p[1]);
      row[static_cast<size_t>(x) * 3 + 2] = to_byte(p[2]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline Image load_png(const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (!fp) throw DataError("cannot open png: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("png read error: " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image im(static_cast<int>(h), static_cast<int>(w));
  std::vector<uint8_t> row(static_cast<size_t>(w) * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      float* p = im.px(static_cast<int>(y), static_cast<int>(x));
      p[0] = row[static_cast<size_t>(x) * 3 + 0] / 255.0f;
      p[1] = row[static_cast<size_t>(x) * 3 + 1] / 255.0f;
      p[2] = row[static_cast<size_t>(x) * 3 + 2] / 255.0f;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return im;
}

}  // namespace stylesplat
