// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <string_view>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"

namespace nerfedit::localize {

/// Zero-shot text segmentation h(I, T): per-pixel probability that the pixel
/// belongs to `text`, at the provider's square input resolution.
class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;
  [[nodiscard]] virtual int resolution() const = 0;
  /// `image` is RGB in [0,1] at resolution() x resolution().
  virtual Image<float> segment(const Image<float>& image, std::string_view text) = 0;
};

/// Probability 1 inside a fixed disk for one text, 0 everywhere for others.
/// Center and radius are in normalized image coordinates.
class DiskSegmenter final : public SegmentationProvider {
 public:
  DiskSegmenter(std::string text, double cx, double cy, double radius, int resolution = 352)
      : text_(std::move(text)), cx_(cx), cy_(cy), radius_(radius), resolution_(resolution) {}

  [[nodiscard]] int resolution() const override { return resolution_; }

  Image<float> segment(const Image<float>& image, std::string_view text) override {
    require(image.width == resolution_ && image.height == resolution_, "DiskSegmenter: wrong input resolution");
    Image<float> p(resolution_, resolution_, 1);
    if (text != text_) return p;
    for (int y = 0; y < resolution_; ++y)
      for (int x = 0; x < resolution_; ++x) {
        const double u = (x + 0.5) / resolution_ - cx_, v = (y + 0.5) / resolution_ - cy_;
        p.at(x, y) = (u * u + v * v <= radius_ * radius_) ? 1.0f : 0.0f;
      }
    return p;
  }

  /// The disk rasterized at w x h with the same pixel-center rule.
  [[nodiscard]] Image<uint8_t> disk(int w, int h) const {
    Image<uint8_t> m(w, h, 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double u = (x + 0.5) / w - cx_, v = (y + 0.5) / h - cy_;
        m.at(x, y) = (u * u + v * v <= radius_ * radius_) ? 1 : 0;
      }
    return m;
  }

 private:
  std::string text_;
  double cx_, cy_, radius_;
  int resolution_;
};

/// Selects pixels whose chromaticity is within `tolerance` (L1) of a key
/// color, for one text. Geometric stand-in that follows an object of known
/// color across views.
class ColorKeySegmenter final : public SegmentationProvider {
 public:
  ColorKeySegmenter(std::string text, const Vec3<double>& key, double tolerance = 0.25, int resolution = 352)
      : text_(std::move(text)), key_(key / key.sum()), tolerance_(tolerance), resolution_(resolution) {}

  [[nodiscard]] int resolution() const override { return resolution_; }

  Image<float> segment(const Image<float>& image, std::string_view text) override {
    require(image.width == resolution_ && image.height == resolution_, "ColorKeySegmenter: wrong input resolution");
    Image<float> p(resolution_, resolution_, 1);
    if (text != text_) return p;
    for (int y = 0; y < resolution_; ++y)
      for (int x = 0; x < resolution_; ++x) {
        Vec3<double> c(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
        const double s = c.sum();
        if (s <= 1e-6) continue;
        p.at(x, y) = ((c / s - key_).lpNorm<1>() < tolerance_) ? 1.0f : 0.0f;
      }
    return p;
  }

 private:
  std::string text_;
  Vec3<double> key_;
  double tolerance_;
  int resolution_;
};

}  // namespace nerfedit::localize
