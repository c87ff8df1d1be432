// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/render/camera.hpp"

namespace nerfedit::render {

struct PixelCoord {
  int x = 0;
  int y = 0;
};

/// Rows x cols grid of rays; pixel (r, c) maps to ray index r * cols + c.
template <typename T>
struct RayPatch {
  CameraModel camera;
  int rows = 0;
  int cols = 0;
  std::vector<PixelCoord> pixels;
  Mat3X<T> origins;
  Mat3X<T> directions;
  T t_near = T(2);
  T t_far = T(6);

  [[nodiscard]] int size() const { return rows * cols; }
};

struct PatchLayout {
  int start_x = 0;
  int start_y = 0;
  int stride_x = 1;
  int stride_y = 1;
};

/// Largest admissible start index along an axis of length `extent` for patch size s.
inline int max_patch_start(int extent, int s) { return extent / s + extent % s - 1; }

inline PatchLayout sample_patch_layout(int width, int height, int s, Rng& rng) {
  require(s >= 1, "sample_patch_rays: patch size must be >= 1");
  require(s <= width && s <= height, "sample_patch_rays: patch size exceeds image size");
  PatchLayout l;
  l.stride_x = width / s;
  l.stride_y = height / s;
  l.start_x = uniform_int(rng, 0, max_patch_start(width, s));
  l.start_y = uniform_int(rng, 0, max_patch_start(height, s));
  return l;
}

template <typename T>
RayPatch<T> rays_for_pixels(const CameraModel& cam, std::vector<PixelCoord> pixels, int rows, int cols, T t_near,
                            T t_far) {
  require(t_near < t_far, "RayPatch: t_near must be < t_far");
  RayPatch<T> p;
  p.camera = cam;
  p.rows = rows;
  p.cols = cols;
  p.t_near = t_near;
  p.t_far = t_far;
  p.origins.resize(3, static_cast<Eigen::Index>(pixels.size()));
  p.directions.resize(3, static_cast<Eigen::Index>(pixels.size()));
  const Eigen::Vector3d o = cam.position();
  for (size_t i = 0; i < pixels.size(); ++i) {
    p.origins.col(i) = o.cast<T>();
    p.directions.col(i) = cam.direction(pixels[i].x, pixels[i].y).cast<T>();
  }
  p.pixels = std::move(pixels);
  return p;
}

template <typename T>
RayPatch<T> patch_from_layout(const CameraModel& cam, int s, const PatchLayout& l, T t_near, T t_far) {
  std::vector<PixelCoord> px;
  px.reserve(static_cast<size_t>(s) * s);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) px.push_back({l.start_x + c * l.stride_x, l.start_y + r * l.stride_y});
  return rays_for_pixels<T>(cam, std::move(px), s, s, t_near, t_far);
}

/// S x S rays spread over the whole image plane with strides floor(W/S),
/// floor(H/S) and a uniformly drawn start per axis.
template <typename T>
RayPatch<T> sample_patch_rays(const CameraModel& cam, int s, Rng& rng, T t_near, T t_far) {
  cam.intrinsics.validate();
  const auto layout = sample_patch_layout(cam.intrinsics.width, cam.intrinsics.height, s, rng);
  return patch_from_layout<T>(cam, s, layout, t_near, t_far);
}

/// Every pixel of the image, row-major.
template <typename T>
RayPatch<T> full_image_rays(const CameraModel& cam, T t_near, T t_far) {
  cam.intrinsics.validate();
  const int w = cam.intrinsics.width, h = cam.intrinsics.height;
  std::vector<PixelCoord> px;
  px.reserve(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) px.push_back({x, y});
  return rays_for_pixels<T>(cam, std::move(px), h, w, t_near, t_far);
}

/// One draw per equal-width bin of [t_near, t_far]; bin midpoints when rng is null.
template <typename T>
std::vector<T> stratified_depths(T t_near, T t_far, int k, Rng* rng) {
  require(k >= 1, "stratified_depths: K must be >= 1");
  require(t_near < t_far, "stratified_depths: t_near must be < t_far");
  std::vector<T> t(k);
  const double width = (double(t_far) - double(t_near)) / k;
  for (int i = 0; i < k; ++i) {
    const double u = rng ? uniform01(*rng) : 0.5;
    t[i] = static_cast<T>(double(t_near) + (i + u) * width);
  }
  return t;
}

/// Inverse-CDF draws from a piecewise-constant density over `edges` (n+1
/// entries) with bin masses `weights` (n entries, nonnegative, not all zero).
/// Evenly spaced quantiles when rng is null.
template <typename T>
std::vector<T> sample_pdf(std::span<const T> edges, std::span<const T> weights, int count, Rng* rng) {
  require(edges.size() == weights.size() + 1, "sample_pdf: edges must have one more entry than weights");
  std::vector<double> cdf(weights.size() + 1, 0.0);
  for (size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= T(0), "sample_pdf: negative weight");
    cdf[i + 1] = cdf[i] + double(weights[i]);
  }
  const double total = cdf.back();
  require(total > 0, "sample_pdf: all-zero weights");
  std::vector<T> out(count);
  for (int j = 0; j < count; ++j) {
    const double u = (rng ? uniform01(*rng) : (j + 0.5) / count) * total;
    // First bin whose cumulative mass exceeds u; zero-mass bins are never chosen.
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u);
    size_t bin = std::min<size_t>(static_cast<size_t>(it - cdf.begin()) - 1, weights.size() - 1);
    while (weights[bin] <= T(0) && bin > 0) --bin;
    const double frac = std::clamp((u - cdf[bin]) / double(weights[bin]), 0.0, 1.0);
    out[j] = static_cast<T>(double(edges[bin]) + frac * (double(edges[bin + 1]) - double(edges[bin])));
  }
  return out;
}

/// Hierarchical resampling: coarse sample k owns the interval between its
/// neighbors' midpoints. Returns coarse and fine depths merged and sorted.
/// All-zero weights fall back to stratified fine samples; the fallback is
/// reported through `fell_back` when given, else logged as a warning.
template <typename T>
std::vector<T> importance_depths(std::span<const T> coarse, std::span<const T> weights, T t_near, T t_far,
                                 int k_fine, Rng* rng, bool* fell_back = nullptr) {
  require(coarse.size() == weights.size() && !coarse.empty(), "importance_depths: size mismatch");
  std::vector<T> fine;
  bool any = false;
  for (T w : weights) {
    require(w >= T(0), "importance_depths: weights must be nonnegative");
    any = any || w > T(0);
  }
  if (fell_back) *fell_back = !any;
  if (!any) {
    if (!fell_back) log::warn("importance_depths: all coarse weights are zero; falling back to stratified sampling");
    fine = stratified_depths(t_near, t_far, k_fine, rng);
  } else {
    std::vector<T> edges(coarse.size() + 1);
    edges.front() = t_near;
    edges.back() = t_far;
    for (size_t i = 1; i < coarse.size(); ++i) edges[i] = T(0.5) * (coarse[i - 1] + coarse[i]);
    fine = sample_pdf<T>(edges, weights, k_fine, rng);
  }
  std::vector<T> merged(coarse.begin(), coarse.end());
  merged.insert(merged.end(), fine.begin(), fine.end());
  std::sort(merged.begin(), merged.end());
  return merged;
}

/// delta_k = t_{k+1} - t_k; the last interval is capped at t_far - t_K.
template <typename T>
std::vector<T> sample_deltas(std::span<const T> t, T t_far) {
  std::vector<T> d(t.size());
  for (size_t i = 0; i + 1 < t.size(); ++i) d[i] = t[i + 1] - t[i];
  if (!t.empty()) d.back() = std::max(t_far - t.back(), T(0));
  return d;
}

}  // namespace nerfedit::render
