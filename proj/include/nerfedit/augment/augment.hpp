// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"

namespace nerfedit::augment {

struct AugmentConfig {
  // Includes the unaugmented original at index 0.
  int size = 24;
  double perspective_scale = 0.4;
  double perspective_probability = 0.5;
  bool color_jitter = true;
  bool translation = true;
  bool cutout = true;
  double translation_ratio = 0.125;
  double cutout_ratio = 0.5;
  std::vector<std::string> templates{"{}"};

  void validate() const {
    require(size >= 1, "AugmentConfig: size must be >= 1");
    require(perspective_probability >= 0 && perspective_probability <= 1,
            "AugmentConfig: perspective probability must lie in [0,1]");
    require(perspective_scale >= 0 && perspective_scale <= 1, "AugmentConfig: perspective scale must lie in [0,1]");
    require(translation_ratio >= 0 && translation_ratio <= 1, "AugmentConfig: translation ratio must lie in [0,1]");
    require(cutout_ratio >= 0 && cutout_ratio <= 1, "AugmentConfig: cutout ratio must lie in [0,1]");
  }
};

/// Sampled parameters for one batch entry.
struct AugmentParams {
  bool identity = true;
  bool jitter = false;
  double brightness = 0, saturation = 1, contrast = 1;  // shift, scale, scale
  int shift_x = 0, shift_y = 0;
  bool cut = false;
  int cut_x0 = 0, cut_x1 = 0, cut_y0 = 0, cut_y1 = 0;  // inclusive
  bool warp = false;
  // Maps output pixel coordinates to input coordinates.
  std::array<double, 8> homography{1, 0, 0, 0, 1, 0, 0, 0};
};

namespace detail {

/// Solves for the homography taking `from` corners to `to` corners.
inline std::array<double, 8> homography_between(const std::array<std::array<double, 2>, 4>& from,
                                                const std::array<std::array<double, 2>, 4>& to) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = from[i][0], y = from[i][1], u = to[i][0], v = to[i][1];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  std::array<double, 8> out{};
  for (int i = 0; i < 8; ++i) out[i] = h(i);
  return out;
}

// Bilinear taps (index, weight) of input pixels feeding output pixel (x, y).
template <typename F>
void warp_taps(const AugmentParams& p, int w, int h, int x, int y, F&& visit) {
  const auto& c = p.homography;
  const double ox = x + 0.5, oy = y + 0.5;
  const double den = c[6] * ox + c[7] * oy + 1.0;
  const double ix = (c[0] * ox + c[1] * oy + c[2]) / den - 0.5;
  const double iy = (c[3] * ox + c[4] * oy + c[5]) / den - 0.5;
  const double fx = std::floor(ix), fy = std::floor(iy);
  const double wx = ix - fx, wy = iy - fy;
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int xs[2] = {x0, x0 + 1}, ys[2] = {y0, y0 + 1};
  const double wxs[2] = {1 - wx, wx}, wys[2] = {1 - wy, wy};
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      if (xs[i] < 0 || xs[i] >= w || ys[j] < 0 || ys[j] >= h) continue;
      visit(xs[i], ys[j], wxs[i] * wys[j]);
    }
}

}  // namespace detail

inline AugmentParams sample_params(const AugmentConfig& cfg, int w, int h, Rng& rng) {
  AugmentParams p;
  p.identity = false;
  if (cfg.color_jitter) {
    p.jitter = true;
    p.brightness = uniform01(rng) - 0.5;
    p.saturation = uniform01(rng) * 2.0;
    p.contrast = uniform01(rng) + 0.5;
  }
  if (cfg.translation) {
    const int sx = static_cast<int>(w * cfg.translation_ratio + 0.5);
    const int sy = static_cast<int>(h * cfg.translation_ratio + 0.5);
    p.shift_x = uniform_int(rng, -sx, sx);
    p.shift_y = uniform_int(rng, -sy, sy);
  }
  if (cfg.cutout) {
    const int cw = static_cast<int>(w * cfg.cutout_ratio + 0.5);
    const int ch = static_cast<int>(h * cfg.cutout_ratio + 0.5);
    if (cw > 0 && ch > 0) {
      const int ox = uniform_int(rng, 0, w + (1 - cw % 2) - 1);
      const int oy = uniform_int(rng, 0, h + (1 - ch % 2) - 1);
      p.cut = true;
      p.cut_x0 = std::clamp(ox - cw / 2, 0, w - 1);
      p.cut_x1 = std::clamp(ox - cw / 2 + cw - 1, 0, w - 1);
      p.cut_y0 = std::clamp(oy - ch / 2, 0, h - 1);
      p.cut_y1 = std::clamp(oy - ch / 2 + ch - 1, 0, h - 1);
    }
  }
  if (uniform01(rng) < cfg.perspective_probability) {
    const int hw = w / 2, hh = h / 2;
    const int dx = static_cast<int>(cfg.perspective_scale * hw), dy = static_cast<int>(cfg.perspective_scale * hh);
    const std::array<std::array<double, 2>, 4> start{{{0.0, 0.0}, {w - 1.0, 0.0}, {w - 1.0, h - 1.0}, {0.0, h - 1.0}}};
    std::array<std::array<double, 2>, 4> end{};
    end[0] = {double(uniform_int(rng, 0, dx)), double(uniform_int(rng, 0, dy))};
    end[1] = {double(uniform_int(rng, w - dx - 1, w - 1)), double(uniform_int(rng, 0, dy))};
    end[2] = {double(uniform_int(rng, w - dx - 1, w - 1)), double(uniform_int(rng, h - dy - 1, h - 1))};
    end[3] = {double(uniform_int(rng, 0, dx)), double(uniform_int(rng, h - dy - 1, h - 1))};
    p.warp = true;
    p.homography = detail::homography_between(end, start);
  }
  return p;
}

/// Forward of one entry without the final clamp (every stage is affine in
/// the input, so this is also the map whose transpose the vjp applies).
inline Image<double> apply_unclamped(const AugmentParams& p, const Image<double>& in) {
  require(in.channels == 3, "augment: expected an RGB image");
  if (p.identity) return in;
  const int w = in.width, h = in.height;
  Image<double> x = in;
  const size_t n = x.pixel_count();
  if (p.jitter) {
    for (double& v : x.data) v += p.brightness;
    for (size_t i = 0; i < n; ++i) {
      double* px = &x.data[i * 3];
      const double m = (px[0] + px[1] + px[2]) / 3.0;
      for (int c = 0; c < 3; ++c) px[c] = (px[c] - m) * p.saturation + m;
    }
    double m = 0;
    for (double v : x.data) m += v;
    m /= static_cast<double>(x.data.size());
    for (double& v : x.data) v = (v - m) * p.contrast + m;
  }
  if (p.shift_x != 0 || p.shift_y != 0) {
    Image<double> t(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const int sx = xx + p.shift_x, sy = y + p.shift_y;
        if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
        for (int c = 0; c < 3; ++c) t.at(xx, y, c) = x.at(sx, sy, c);
      }
    x = std::move(t);
  }
  if (p.cut)
    for (int y = p.cut_y0; y <= p.cut_y1; ++y)
      for (int xx = p.cut_x0; xx <= p.cut_x1; ++xx)
        for (int c = 0; c < 3; ++c) x.at(xx, y, c) = 0;
  if (p.warp) {
    Image<double> t(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        detail::warp_taps(p, w, h, xx, y, [&](int sx, int sy, double wt) {
          for (int c = 0; c < 3; ++c) t.at(xx, y, c) += wt * x.at(sx, sy, c);
        });
    x = std::move(t);
  }
  return x;
}

inline Image<double> apply(const AugmentParams& p, const Image<double>& in) {
  Image<double> x = apply_unclamped(p, in);
  for (double& v : x.data) v = std::clamp(v, 0.0, 1.0);
  return x;
}

/// Transpose of `apply` at `in`: maps d/d(output) to d/d(input).
inline Image<double> apply_vjp(const AugmentParams& p, const Image<double>& in, const Image<double>& grad_out) {
  require(grad_out.same_shape(in), "augment vjp: gradient shape mismatch");
  const int w = in.width, h = in.height;
  Image<double> g = grad_out;
  const Image<double> pre = apply_unclamped(p, in);
  for (size_t i = 0; i < g.data.size(); ++i)
    if (pre.data[i] < 0.0 || pre.data[i] > 1.0) g.data[i] = 0;
  if (p.identity) return g;
  if (p.warp) {
    Image<double> t(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        detail::warp_taps(p, w, h, xx, y, [&](int sx, int sy, double wt) {
          for (int c = 0; c < 3; ++c) t.at(sx, sy, c) += wt * g.at(xx, y, c);
        });
    g = std::move(t);
  }
  if (p.cut)
    for (int y = p.cut_y0; y <= p.cut_y1; ++y)
      for (int xx = p.cut_x0; xx <= p.cut_x1; ++xx)
        for (int c = 0; c < 3; ++c) g.at(xx, y, c) = 0;
  if (p.shift_x != 0 || p.shift_y != 0) {
    Image<double> t(w, h, 3);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        const int sx = xx + p.shift_x, sy = y + p.shift_y;
        if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
        for (int c = 0; c < 3; ++c) t.at(sx, sy, c) += g.at(xx, y, c);
      }
    g = std::move(t);
  }
  if (p.jitter) {
    double s = 0;
    for (double v : g.data) s += v;
    const double k = (1.0 - p.contrast) * s / static_cast<double>(g.data.size());
    for (double& v : g.data) v = p.contrast * v + k;
    for (size_t i = 0; i < g.pixel_count(); ++i) {
      double* px = &g.data[i * 3];
      const double m = (1.0 - p.saturation) * (px[0] + px[1] + px[2]) / 3.0;
      for (int c = 0; c < 3; ++c) px[c] = p.saturation * px[c] + m;
    }
    // brightness shift has identity Jacobian
  }
  return g;
}

/// One set of sampled transforms reused for every image of a step, so the
/// original, editable and blended renders are augmented identically.
class AugmentPlan {
 public:
  AugmentPlan() = default;
  explicit AugmentPlan(std::vector<AugmentParams> entries) : entries_(std::move(entries)) {}

  [[nodiscard]] size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<AugmentParams>& entries() const { return entries_; }

  [[nodiscard]] std::vector<Image<double>> apply(const Image<double>& in) const {
    std::vector<Image<double>> out;
    out.reserve(entries_.size());
    for (const auto& p : entries_) out.push_back(augment::apply(p, in));
    return out;
  }

  /// Sums the per-entry transposes.
  [[nodiscard]] Image<double> vjp(const Image<double>& in, const std::vector<Image<double>>& grads) const {
    require(grads.size() == entries_.size(), "AugmentPlan::vjp: gradient count mismatch");
    Image<double> total(in.width, in.height, in.channels);
    for (size_t i = 0; i < entries_.size(); ++i) {
      const auto g = apply_vjp(entries_[i], in, grads[i]);
      for (size_t j = 0; j < g.data.size(); ++j) total.data[j] += g.data[j];
    }
    return total;
  }

 private:
  std::vector<AugmentParams> entries_;
};

inline AugmentPlan sample_plan(const AugmentConfig& cfg, int w, int h, Rng& rng) {
  cfg.validate();
  std::vector<AugmentParams> e(1);
  for (int i = 1; i < cfg.size; ++i) e.push_back(sample_params(cfg, w, h, rng));
  return AugmentPlan(std::move(e));
}

inline std::vector<Image<double>> augment_images(const Image<double>& patch, const AugmentConfig& cfg, Rng& rng) {
  return sample_plan(cfg, patch.width, patch.height, rng).apply(patch);
}

inline std::string apply_template(const std::string& tmpl, const std::string& text) {
  const size_t pos = tmpl.find("{}");
  require(pos != std::string::npos, "text template lacks a {} placeholder: " + tmpl);
  return tmpl.substr(0, pos) + text + tmpl.substr(pos + 2);
}

struct TextPair {
  std::string source, target;
  size_t template_index = 0;
};

/// `count` aligned pairs; each pair draws one template for both texts.
inline std::vector<TextPair> augment_texts(const std::string& source, const std::string& target,
                                           const std::vector<std::string>& templates, int count, Rng& rng) {
  require(count >= 1, "augment_texts: count must be >= 1");
  std::vector<TextPair> out;
  if (templates.empty()) {
    log::warn("augment_texts: empty template list; passing texts through unchanged");
    out.assign(static_cast<size_t>(count), TextPair{source, target, 0});
    return out;
  }
  for (int i = 0; i < count; ++i) {
    const size_t k = static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(templates.size()) - 1));
    out.push_back({apply_template(templates[k], source), apply_template(templates[k], target), k});
  }
  return out;
}

/// One template per non-blank line; each must contain "{}".
inline std::vector<std::string> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open template file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    require(line.find("{}") != std::string::npos, "template without {} placeholder in " + path + ": " + line);
    out.push_back(line);
  }
  if (out.empty()) log::warn("template file {} is empty", path);
  return out;
}

}  // namespace nerfedit::augment
