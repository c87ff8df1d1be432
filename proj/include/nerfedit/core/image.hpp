// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nerfedit/core/error.hpp"

namespace nerfedit {

/// Row-major interleaved image (HWC). Values are not clamped; rendered
/// colors may leave [0,1] inside losses and are clamped only on export.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T(0))
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {
    require(w >= 0 && h >= 0 && c > 0, "Image: invalid dimensions");
  }

  [[nodiscard]] size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  [[nodiscard]] size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  [[nodiscard]] bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  template <typename U>
  [[nodiscard]] Image<U> cast() const {
    Image<U> out(width, height, channels);
    std::transform(data.begin(), data.end(), out.data.begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }
};

/// Bilinear resize with half-pixel centers (edge-clamped).
template <typename T>
Image<T> resize_bilinear(const Image<T>& in, int w, int h) {
  require(in.width > 0 && in.height > 0, "resize_bilinear: empty image");
  Image<T> out(w, h, in.channels);
  const double sx = static_cast<double>(in.width) / w;
  const double sy = static_cast<double>(in.height) / h;
  for (int y = 0; y < h; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(in.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, in.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < w; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(in.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, in.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < in.channels; ++c) {
        double v = (1 - wy) * ((1 - wx) * in.at(x0, y0, c) + wx * in.at(x1, y0, c)) +
                   wy * ((1 - wx) * in.at(x0, y1, c) + wx * in.at(x1, y1, c));
        out.at(x, y, c) = static_cast<T>(v);
      }
    }
  }
  return out;
}

template <typename T>
double mean_abs_difference(const Image<T>& a, const Image<T>& b) {
  require(a.same_shape(b), "mean_abs_difference: shape mismatch");
  if (a.data.empty()) return 0.0;
  double s = 0;
  for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(double(a.data[i]) - double(b.data[i]));
  return s / double(a.data.size());
}

/// Peak signal-to-noise ratio for [0,1] images.
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b) {
  require(a.same_shape(b), "psnr: shape mismatch");
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = double(a.data[i]) - double(b.data[i]);
    mse += d * d;
  }
  mse /= double(std::max<size_t>(1, a.data.size()));
  if (mse <= 0) return 100.0;
  return -10.0 * std::log10(mse);
}

}  // namespace nerfedit
