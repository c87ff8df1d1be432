// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/render/camera.hpp"
#include "nerfedit/render/composite.hpp"
#include "nerfedit/render/sampling.hpp"
#include "nerfedit/render/toggles.hpp"

namespace nerfedit::render {

struct RenderConfig {
  int coarse_samples = 64;
  int fine_samples = 128;
  double t_near = 2.0;
  double t_far = 6.0;
  bool white_background = true;
  // Samples per field evaluation chunk.
  int chunk = 1 << 15;

  void validate() const {
    require(coarse_samples >= 1 && fine_samples >= 0, "RenderConfig: sample counts must be positive");
    require(t_near < t_far && t_near >= 0, "RenderConfig: require 0 <= t_near < t_far");
    require(chunk >= 1, "RenderConfig: chunk must be >= 1");
  }
  [[nodiscard]] double background() const { return white_background ? 1.0 : 0.0; }
};

/// The frozen scene, the editable field (absent = identity edit) and the
/// enabled operations.
template <typename T>
struct SceneFields {
  const fields::PretrainedModel<T>* pretrained = nullptr;
  const fields::EditableField<T>* editable = nullptr;
  EditOps ops{};
};

/// Colors (C^o, C^e, C^b) and opacities (add, remove, change) for a ray grid.
/// C^o and C^b are composited over the background; C^e is not.
template <typename T>
struct BlendedRender {
  Image<T> original, editable, blended;
  Image<T> add, remove, change;
  Image<T> original_opacity, blended_opacity;

  BlendedRender() = default;
  BlendedRender(int cols, int rows)
      : original(cols, rows, 3), editable(cols, rows, 3), blended(cols, rows, 3), add(cols, rows, 1),
        remove(cols, rows, 1), change(cols, rows, 1), original_opacity(cols, rows, 1), blended_opacity(cols, rows, 1) {}
};

/// Fine-pass samples with field outputs, kept so the backward pass can
/// re-evaluate the editable field on identical inputs.
template <typename T>
struct PatchSamples {
  int rays = 0;
  int per_ray = 0;
  std::vector<T> depths;  // rays * per_ray
  Eigen::Array<T, 1, Eigen::Dynamic> deltas;
  Mat3X<T> positions, directions;
  fields::FieldBatch<T> original;
  fields::EditableBatch<T> editable;  // after operation toggles

  [[nodiscard]] Eigen::Index offset(int ray) const { return static_cast<Eigen::Index>(ray) * per_ray; }
};

namespace detail {

template <typename T>
void fill_points(const RayPatch<T>& patch, const std::vector<T>& depths, int per_ray, Mat3X<T>& pos, Mat3X<T>& dir) {
  const int n = patch.size();
  pos.resize(3, static_cast<Eigen::Index>(n) * per_ray);
  dir.resize(3, pos.cols());
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < per_ray; ++k) {
      const Eigen::Index i = static_cast<Eigen::Index>(r) * per_ray + k;
      pos.col(i) = patch.origins.col(r) + depths[i] * patch.directions.col(r);
      dir.col(i) = patch.directions.col(r);
    }
}

template <typename T>
fields::FieldBatch<T> eval_original(const fields::PretrainedField<T>& f, const Mat3X<T>& pos, const Mat3X<T>& dir,
                                    int chunk) {
  fields::FieldBatch<T> out{Row<T>(pos.cols()), Mat3X<T>(3, pos.cols())};
  for (Eigen::Index s = 0; s < pos.cols(); s += chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk, pos.cols() - s);
    auto b = f.forward(pos.middleCols(s, n), dir.middleCols(s, n));
    out.density.segment(s, n) = b.density;
    out.color.middleCols(s, n) = b.color;
  }
  return out;
}

template <typename T>
fields::EditableBatch<T> eval_editable(const fields::EditableField<T>* f, const EditOps& ops, const Mat3X<T>& pos,
                                       const Mat3X<T>& dir, int chunk) {
  if (!f) return fields::EditableBatch<T>::zeros(pos.cols());
  fields::EditableBatch<T> out = fields::EditableBatch<T>::zeros(pos.cols());
  for (Eigen::Index s = 0; s < pos.cols(); s += chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(chunk, pos.cols() - s);
    auto b = f->forward(pos.middleCols(s, n), dir.middleCols(s, n));
    out.density.segment(s, n) = b.density;
    out.color.middleCols(s, n) = b.color;
    out.density_blend.segment(s, n) = b.density_blend;
    out.color_blend.segment(s, n) = b.color_blend;
  }
  return apply_operation_toggles(std::move(out), ops);
}

template <typename T>
BlendedRay<T> ray_view(const PatchSamples<T>& s, int r) {
  const Eigen::Index o = s.offset(r), k = s.per_ray;
  return {s.deltas.segment(o, k),         s.original.density.array().segment(o, k), s.original.color.middleCols(o, k),
          s.editable.density.array().segment(o, k), s.editable.color.middleCols(o, k),
          s.editable.density_blend.array().segment(o, k), s.editable.color_blend.array().segment(o, k)};
}

}  // namespace detail

/// Coarse stratified pass, importance resampling on T^b alpha^b, then the
/// fine pass on merged samples. `rng` null = deterministic (bin midpoints
/// and evenly spaced quantiles).
template <typename T>
PatchSamples<T> sample_patch(const RayPatch<T>& patch, const SceneFields<T>& scene, const RenderConfig& cfg,
                             Rng* rng) {
  cfg.validate();
  require(scene.pretrained != nullptr, "render: pretrained field not loaded");
  const int n = patch.size();
  const T t_near = patch.t_near, t_far = patch.t_far;
  const int kc = cfg.coarse_samples;

  std::vector<T> coarse(static_cast<size_t>(n) * kc);
  for (int r = 0; r < n; ++r) {
    auto t = stratified_depths<T>(t_near, t_far, kc, rng);
    std::copy(t.begin(), t.end(), coarse.begin() + static_cast<size_t>(r) * kc);
  }

  PatchSamples<T> s;
  s.rays = n;
  if (cfg.fine_samples == 0) {
    s.per_ray = kc;
    s.depths = std::move(coarse);
  } else {
    PatchSamples<T> c;
    c.rays = n;
    c.per_ray = kc;
    c.depths = coarse;
    detail::fill_points(patch, c.depths, kc, c.positions, c.directions);
    c.original = detail::eval_original(scene.pretrained->coarse, c.positions, c.directions, cfg.chunk);
    c.editable = detail::eval_editable(scene.editable, scene.ops, c.positions, c.directions, cfg.chunk);
    c.deltas.resize(static_cast<Eigen::Index>(n) * kc);
    for (int r = 0; r < n; ++r) {
      auto d = sample_deltas<T>(std::span<const T>(c.depths.data() + static_cast<size_t>(r) * kc, kc), t_far);
      for (int k = 0; k < kc; ++k) c.deltas(c.offset(r) + k) = d[k];
    }
    s.per_ray = kc + cfg.fine_samples;
    s.depths.resize(static_cast<size_t>(n) * s.per_ray);
    BlendedTrace<T> trace;
    int empty_rays = 0;
    for (int r = 0; r < n; ++r) {
      composite_blended(detail::ray_view(c, r), &trace);
      bool fell_back = false;
      auto merged = importance_depths<T>(std::span<const T>(c.depths.data() + static_cast<size_t>(r) * kc, kc),
                                         trace.weights, t_near, t_far, cfg.fine_samples, rng, &fell_back);
      empty_rays += fell_back;
      std::copy(merged.begin(), merged.end(), s.depths.begin() + static_cast<size_t>(r) * s.per_ray);
    }
    // Rays through empty space are expected; they use stratified fine samples.
    if (empty_rays > 0) log::debug("render: {} of {} rays had zero coarse weight; stratified fallback", empty_rays, n);
  }
  detail::fill_points(patch, s.depths, s.per_ray, s.positions, s.directions);
  s.deltas.resize(static_cast<Eigen::Index>(n) * s.per_ray);
  for (int r = 0; r < n; ++r) {
    auto d = sample_deltas<T>(std::span<const T>(s.depths.data() + static_cast<size_t>(r) * s.per_ray, s.per_ray),
                              t_far);
    for (int k = 0; k < s.per_ray; ++k) s.deltas(s.offset(r) + k) = d[k];
  }
  s.original = detail::eval_original(scene.pretrained->fine_network(), s.positions, s.directions, cfg.chunk);
  s.editable = detail::eval_editable(scene.editable, scene.ops, s.positions, s.directions, cfg.chunk);
  return s;
}

template <typename T>
BlendedRender<T> composite_patch(const RayPatch<T>& patch, const PatchSamples<T>& s, const RenderConfig& cfg) {
  BlendedRender<T> out(patch.cols, patch.rows);
  const T bg = static_cast<T>(cfg.background());
  for (int r = 0; r < s.rays; ++r) {
    const int x = r % patch.cols, y = r / patch.cols;
    const auto view = detail::ray_view(s, r);
    const auto o = composite_original<T>(view.delta, view.sigma_o, view.color_o);
    const auto b = composite_blended(view);
    for (int c = 0; c < 3; ++c) {
      out.original.at(x, y, c) = o.color(c) + bg * (T(1) - o.opacity);
      out.blended.at(x, y, c) = b.blended(c) + bg * (T(1) - b.opacity);
      out.editable.at(x, y, c) = b.editable(c);
    }
    out.add.at(x, y) = b.add;
    out.remove.at(x, y) = b.remove;
    out.change.at(x, y) = b.change;
    out.original_opacity.at(x, y) = o.opacity;
    out.blended_opacity.at(x, y) = b.opacity;
  }
  return out;
}

/// Renders one ray grid: coarse pass, importance pass, compositing.
template <typename T>
BlendedRender<T> render_patch(const RayPatch<T>& patch, const SceneFields<T>& scene, const RenderConfig& cfg, Rng* rng,
                              PatchSamples<T>* keep = nullptr) {
  auto s = sample_patch(patch, scene, cfg, rng);
  auto out = composite_patch(patch, s, cfg);
  if (keep) *keep = std::move(s);
  return out;
}

/// Per-pixel gradients of a scalar loss w.r.t. the rendered patch. `blended`
/// is w.r.t. the background-composited C^b.
template <typename T>
struct PatchCotangent {
  Image<T> blended, editable;
  Image<T> add, remove, change;

  PatchCotangent() = default;
  PatchCotangent(int cols, int rows)
      : blended(cols, rows, 3), editable(cols, rows, 3), add(cols, rows, 1), remove(cols, rows, 1),
        change(cols, rows, 1) {}
};

/// Backpropagates patch cotangents into the editable field's parameter
/// gradients. The editable field is re-evaluated chunk by chunk with caches.
template <typename T>
void backward_patch(const RayPatch<T>& patch, const PatchSamples<T>& s, const SceneFields<T>& scene,
                    const RenderConfig& cfg, const PatchCotangent<T>& g, GradientRouting routing,
                    fields::ParameterSet<T>& grads) {
  require(scene.editable != nullptr, "backward_patch: no editable field");
  const Eigen::Index total = s.positions.cols();
  auto dg = fields::EditableGrad<T>::zeros(total);
  Eigen::Array<T, 1, Eigen::Dynamic> d_sigma = Eigen::Array<T, 1, Eigen::Dynamic>::Zero(total);
  Eigen::Array<T, 1, Eigen::Dynamic> d_db = Eigen::Array<T, 1, Eigen::Dynamic>::Zero(total);
  Eigen::Array<T, 1, Eigen::Dynamic> d_cb = Eigen::Array<T, 1, Eigen::Dynamic>::Zero(total);
  const T bg = static_cast<T>(cfg.background());
  for (int r = 0; r < s.rays; ++r) {
    const int x = r % patch.cols, y = r / patch.cols;
    BlendedCotangent<T> c;
    for (int ch = 0; ch < 3; ++ch) {
      c.blended(ch) = g.blended.at(x, y, ch);
      c.editable(ch) = g.editable.at(x, y, ch);
    }
    c.opacity = -bg * c.blended.sum();
    c.add = g.add.at(x, y);
    c.remove = g.remove.at(x, y);
    c.change = g.change.at(x, y);
    const Eigen::Index o = s.offset(r), k = s.per_ray;
    composite_blended_backward(detail::ray_view(s, r), c, routing, d_sigma.segment(o, k), dg.color.middleCols(o, k),
                               d_db.segment(o, k), d_cb.segment(o, k));
  }
  dg.density = d_sigma.matrix();
  dg.density_blend = d_db.matrix();
  dg.color_blend = d_cb.matrix();
  apply_operation_toggles_grad(dg, scene.ops);

  typename fields::EditableField<T>::Cache cache;
  for (Eigen::Index st = 0; st < total; st += cfg.chunk) {
    const Eigen::Index n = std::min<Eigen::Index>(cfg.chunk, total - st);
    scene.editable->forward(s.positions.middleCols(st, n), s.directions.middleCols(st, n), &cache);
    fields::EditableGrad<T> part{dg.density.segment(st, n), dg.color.middleCols(st, n),
                                 dg.density_blend.segment(st, n), dg.color_blend.segment(st, n)};
    scene.editable->backward(cache, part, grads);
  }
}

/// All six views of a full image at stride 1 with deterministic sampling.
template <typename T>
BlendedRender<T> render_full_image(const CameraModel& cam, const SceneFields<T>& scene, const RenderConfig& cfg) {
  const auto rays = full_image_rays<T>(cam, static_cast<T>(cfg.t_near), static_cast<T>(cfg.t_far));
  const int w = cam.intrinsics.width, h = cam.intrinsics.height;
  BlendedRender<T> out(w, h);
  const int rows_per_tile = std::max(1, std::min(h, cfg.chunk / std::max(1, w * (cfg.coarse_samples + cfg.fine_samples))));
  for (int y0 = 0; y0 < h; y0 += rows_per_tile) {
    const int rows = std::min(rows_per_tile, h - y0);
    RayPatch<T> tile;
    tile.camera = cam;
    tile.rows = rows;
    tile.cols = w;
    tile.t_near = rays.t_near;
    tile.t_far = rays.t_far;
    const Eigen::Index first = static_cast<Eigen::Index>(y0) * w, count = static_cast<Eigen::Index>(rows) * w;
    tile.origins = rays.origins.middleCols(first, count);
    tile.directions = rays.directions.middleCols(first, count);
    tile.pixels.assign(rays.pixels.begin() + first, rays.pixels.begin() + first + count);
    auto part = render_patch<T>(tile, scene, cfg, nullptr);
    auto copy = [&](const Image<T>& src, Image<T>& dst) {
      std::copy(src.data.begin(), src.data.end(), dst.data.begin() + static_cast<size_t>(first) * dst.channels);
    };
    copy(part.original, out.original);
    copy(part.editable, out.editable);
    copy(part.blended, out.blended);
    copy(part.add, out.add);
    copy(part.remove, out.remove);
    copy(part.change, out.change);
    copy(part.original_opacity, out.original_opacity);
    copy(part.blended_opacity, out.blended_opacity);
  }
  return out;
}

}  // namespace nerfedit::render
