// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"

namespace nerfedit::io {

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

/// Reads an 8-bit PNG (gray, gray+alpha, RGB or RGBA; palettes and 16-bit are
/// converted) into an Image<uint8_t> keeping the channel count.
inline Image<uint8_t> read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw ValidationError("read_png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw RuntimeFailure("read_png: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("read_png: malformed PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto color_type = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = png_get_channels(png, info);
  Image<uint8_t> img(w, h, c);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = img.data.data() + static_cast<size_t>(y) * w * c;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::filesystem::path& path, const Image<uint8_t>& img) {
  require(img.channels >= 1 && img.channels <= 4, "write_png: unsupported channel count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw RuntimeFailure("write_png: cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw RuntimeFailure("write_png: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("write_png: failed writing " + path.string());
  }
  static constexpr int kTypes[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                   PNG_COLOR_TYPE_RGB_ALPHA};
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, kTypes[img.channels - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, const_cast<png_bytep>(img.data.data() + static_cast<size_t>(y) * img.width * img.channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// [0,1] floats to 8 bits: round(255 * clamp(v, 0, 1)).
template <typename T>
Image<uint8_t> to_8bit(const Image<T>& img) {
  Image<uint8_t> out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<uint8_t>(std::lround(255.0 * std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0)));
  return out;
}

template <typename T>
Image<T> from_8bit(const Image<uint8_t>& img) {
  Image<T> out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<T>(img.data[i] / 255.0);
  return out;
}

/// RGB(A) to RGB composited over white: rgb * a + (1 - a).
template <typename T>
Image<T> composite_over_white(const Image<uint8_t>& img) {
  require(img.channels == 3 || img.channels == 4, "composite_over_white: expected RGB or RGBA");
  Image<T> out(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double a = img.channels == 4 ? img.at(x, y, 3) / 255.0 : 1.0;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<T>(img.at(x, y, c) / 255.0 * a + (1.0 - a));
    }
  return out;
}

template <typename T>
void write_png(const std::filesystem::path& path, const Image<T>& img) {
  write_png(path, to_8bit(img));
}

}  // namespace nerfedit::io
