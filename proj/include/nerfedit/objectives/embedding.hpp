// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"

namespace nerfedit::objectives {

using Embedding = VecX<double>;

/// Joint image/text embedding with unit-norm outputs. Training needs the
/// image encoder's vector-Jacobian product to backpropagate into pixels.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  [[nodiscard]] virtual int dim() const = 0;
  virtual Embedding embed_image(const Image<double>& image) = 0;
  /// d<grad, embed_image(image)>/d image.
  virtual Image<double> embed_image_vjp(const Image<double>& image, const Embedding& grad) = 0;
  virtual Embedding embed_text(std::string_view text) = 0;
};

/// Deterministic offline embedder: an image maps to its normalized mean
/// RGB (offset by a small gray floor so black images stay embeddable), a
/// text to the normalized RGB of the color word it mentions (the one
/// appearing last), or gray when it names none.
class ColorStatsEmbedder final : public EmbeddingProvider {
 public:
  ColorStatsEmbedder() : table_(default_table()) {}
  explicit ColorStatsEmbedder(std::map<std::string, Vec3<double>> table) : table_(std::move(table)) {}

  [[nodiscard]] int dim() const override { return 3; }

  Embedding embed_image(const Image<double>& image) override {
    const Vec3<double> m = mean_rgb(image);
    const double n = m.norm();
    if (!(n > 0)) throw RuntimeFailure("ColorStatsEmbedder: image has zero mean color; cannot normalize");
    return m / n;
  }

  Image<double> embed_image_vjp(const Image<double>& image, const Embedding& grad) override {
    require(grad.size() == 3, "ColorStatsEmbedder: gradient has wrong dimension");
    const Vec3<double> m = mean_rgb(image);
    const double n = m.norm();
    if (!(n > 0)) throw RuntimeFailure("ColorStatsEmbedder: image has zero mean color; cannot normalize");
    const Vec3<double> e = m / n;
    // d(m/|m|)/dm = (I - e e^T) / |m|, dm/dpixel = 1/(H W)
    const Vec3<double> g_mean = (grad - e * e.dot(grad)) / n;
    const double inv = 1.0 / static_cast<double>(image.pixel_count());
    Image<double> out(image.width, image.height, 3);
    for (size_t p = 0; p < image.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = g_mean(c) * inv;
    return out;
  }

  Embedding embed_text(std::string_view text) override {
    return named_color(text).value_or(Vec3<double>(0.5, 0.5, 0.5)).normalized();
  }

  /// RGB of the last color word in `text`, if any.
  [[nodiscard]] std::optional<Vec3<double>> named_color(std::string_view text) const {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    std::optional<Vec3<double>> color;
    size_t best = std::string::npos;
    for (const auto& [word, rgb] : table_) {
      const size_t pos = find_word(lower, word);
      if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
        best = pos;
        color = rgb;
      }
    }
    return color;
  }

  static constexpr double kGrayFloor = 1e-3;

  static Vec3<double> mean_rgb(const Image<double>& image) {
    require(image.channels == 3 && image.pixel_count() > 0, "ColorStatsEmbedder: expected a non-empty RGB image");
    Vec3<double> m = Vec3<double>::Zero();
    for (size_t p = 0; p < image.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) m(c) += image.data[p * 3 + c];
    return m / static_cast<double>(image.pixel_count()) + Vec3<double>::Constant(kGrayFloor);
  }

  static std::map<std::string, Vec3<double>> default_table() {
    return {{"red", {0.9, 0.1, 0.1}},     {"green", {0.1, 0.8, 0.1}},   {"blue", {0.1, 0.2, 0.9}},
            {"yellow", {0.9, 0.85, 0.1}}, {"orange", {0.95, 0.5, 0.1}}, {"purple", {0.5, 0.1, 0.7}},
            {"pink", {0.95, 0.5, 0.7}},   {"brown", {0.45, 0.3, 0.15}}, {"gold", {0.85, 0.65, 0.15}},
            {"white", {1.0, 1.0, 1.0}},   {"black", {0.05, 0.05, 0.05}}, {"gray", {0.5, 0.5, 0.5}}};
  }

 private:
  static size_t find_word(const std::string& text, const std::string& word) {
    size_t found = std::string::npos;
    for (size_t pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
      const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(text[pos - 1]));
      const bool right = pos + word.size() >= text.size() ||
                         !std::isalpha(static_cast<unsigned char>(text[pos + word.size()]));
      if (left && right) found = pos;
    }
    return found;
  }

  std::map<std::string, Vec3<double>> table_;
};

}  // namespace nerfedit::objectives
