// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/io/scene.hpp"
#include "nerfedit/objectives/schedule.hpp"
#include "nerfedit/render/composite.hpp"
#include "nerfedit/render/renderer.hpp"
#include "nerfedit/train/adam.hpp"

namespace nerfedit::train {

struct PretrainConfig {
  fields::PretrainedArchitecture arch{};
  // Train a second network on importance-resampled depths for the fine pass.
  bool separate_fine = true;
  int steps = 200000;
  int batch_rays = 1024;
  int coarse_samples = 64;
  int fine_samples = 128;
  double lr_initial = 5e-4;
  double lr_final = 5e-5;
  AdamConfig adam{};
  double t_near = 2.0;
  double t_far = 6.0;
  uint64_t seed = 0;
  int log_every = 1000;
  // Used for held-out PSNR.
  render::RenderConfig eval_render{};

  void validate() const {
    arch.validate();
    adam.validate();
    require(steps >= 1 && batch_rays >= 1, "pretrain: steps and batch_rays must be >= 1");
    require(coarse_samples >= 1 && fine_samples >= 0, "pretrain: bad sample counts");
    require(!separate_fine || fine_samples > 0, "pretrain: a separate fine network needs fine_samples > 0");
    require(lr_initial > 0 && lr_final > 0, "pretrain: learning rates must be > 0");
    require(t_near < t_far, "pretrain: t_near must be < t_far");
    eval_render.validate();
  }

  /// Small single-network model sized for CPU runs on the procedural scene.
  static PretrainConfig desk() {
    PretrainConfig c;
    c.arch.depth = 4;
    c.arch.width = 64;
    c.arch.skip_layer = 2;
    c.arch.color_width = 32;
    c.arch.position = {6, true};
    c.arch.direction = {2, true};
    c.separate_fine = false;
    c.steps = 400;
    c.batch_rays = 512;
    c.coarse_samples = 48;
    c.fine_samples = 0;
    c.lr_initial = 5e-3;
    c.lr_final = 5e-4;
    c.log_every = 250;
    c.eval_render.coarse_samples = 32;
    c.eval_render.fine_samples = 32;
    return c;
  }

  static PretrainConfig full() {
    PretrainConfig c;
    c.arch.skip_layer = 4;
    c.eval_render.coarse_samples = 64;
    c.eval_render.fine_samples = 128;
    return c;
  }
};

struct PretrainRecord {
  int step = 0;
  double loss = 0;
  double lr = 0;
};

namespace detail {

/// Per-ray depths and deltas for a stratified pass, column-per-sample.
template <typename T>
struct RaySamples {
  int per_ray = 0;
  std::vector<T> depths;
  Eigen::Array<T, 1, Eigen::Dynamic> deltas;
  Mat3X<T> positions, directions;
};

template <typename T>
RaySamples<T> make_samples(const Mat3X<T>& origins, const Mat3X<T>& dirs, std::vector<T> depths, int per_ray,
                           T t_far) {
  RaySamples<T> s;
  s.per_ray = per_ray;
  s.depths = std::move(depths);
  const Eigen::Index n = origins.cols(), total = n * per_ray;
  s.positions.resize(3, total);
  s.directions.resize(3, total);
  s.deltas.resize(total);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto d = render::sample_deltas<T>(std::span<const T>(s.depths.data() + r * per_ray, per_ray), t_far);
    for (int k = 0; k < per_ray; ++k) {
      const Eigen::Index i = r * per_ray + k;
      s.positions.col(i) = origins.col(r) + s.depths[i] * dirs.col(r);
      s.directions.col(i) = dirs.col(r);
      s.deltas(i) = d[k];
    }
  }
  return s;
}

/// Squared-error pass through one network; accumulates parameter gradients
/// and optionally returns the per-sample compositing weights.
template <typename T>
double reconstruction_pass(const fields::PretrainedField<T>& net, const RaySamples<T>& s, const Mat3X<T>& target,
                           T bg, fields::ParameterSet<T>& grads, std::vector<T>* weights) {
  typename fields::PretrainedField<T>::Cache cache;
  const auto out = net.forward(s.positions, s.directions, &cache);
  const Eigen::Index n = target.cols(), k = s.per_ray;
  Eigen::Array<T, 1, Eigen::Dynamic> sigma = out.density.array();
  Eigen::Array<T, 1, Eigen::Dynamic> d_sigma = Eigen::Array<T, 1, Eigen::Dynamic>::Zero(sigma.size());
  Mat3X<T> d_color = Mat3X<T>::Zero(3, sigma.size());
  if (weights) weights->assign(static_cast<size_t>(n * k), T(0));
  double loss = 0;
  const double scale = 1.0 / (3.0 * static_cast<double>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto dl = s.deltas.segment(r * k, k);
    const auto sg = sigma.segment(r * k, k);
    const auto cl = out.color.middleCols(r * k, k);
    const auto comp = render::composite_original<T>(dl, sg, cl);
    const Vec3<T> pred = comp.color + Vec3<T>::Constant(bg * (T(1) - comp.opacity));
    const Vec3<T> err = pred - target.col(r);
    loss += scale * static_cast<double>(err.squaredNorm());
    const Vec3<T> g = static_cast<T>(2.0 * scale) * err;
    render::composite_original_backward<T>(dl, sg, cl, g, -bg * g.sum(), d_sigma.segment(r * k, k),
                                           d_color.middleCols(r * k, k));
    if (weights) {
      T trans = T(1);
      for (Eigen::Index j = 0; j < k; ++j) {
        const T a = render::alpha_from(sg(j), dl(j));
        (*weights)[r * k + j] = trans * a;
        trans *= T(1) - a;
      }
    }
  }
  net.backward(cache, Row<T>(d_sigma.matrix()), d_color, grads);
  return loss;
}

}  // namespace detail

/// Mean PSNR of deterministic full renders against a split's images.
template <typename T>
double held_out_psnr(const fields::PretrainedModel<T>& model, const io::SceneDataset& ds, const std::string& split,
                     const render::RenderConfig& cfg, int max_views = -1) {
  const auto& frames = ds.split(split);
  require(!frames.empty(), "held_out_psnr: empty split");
  const int n = max_views > 0 ? std::min<int>(max_views, static_cast<int>(frames.size())) : static_cast<int>(frames.size());
  render::SceneFields<T> scene{&model, nullptr, render::EditOps::none()};
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const auto img = render::render_full_image<T>(ds.camera(frames[i]), scene, cfg);
    total += psnr(img.original.template cast<float>(), frames[i].image);
  }
  return total / n;
}

/// Reconstruction training on random ray batches drawn across all training
/// views. Throws RuntimeFailure when the loss becomes non-finite.
template <typename T = float>
fields::PretrainedModel<T> pretrain_scene(const io::SceneDataset& ds, const PretrainConfig& cfg,
                                          const std::function<void(const PretrainRecord&)>& on_log = {}) {
  cfg.validate();
  const auto& frames = ds.split("train");
  require(!frames.empty(), "pretrain: no training frames");
  const auto k = ds.intrinsics();
  Rng rng(cfg.seed);
  fields::PretrainedModel<T> model{fields::PretrainedField<T>(cfg.arch, cfg.seed * 2 + 1), std::nullopt};
  if (cfg.separate_fine) model.fine.emplace(cfg.arch, cfg.seed * 2 + 2);
  model.set_trainable(true);
  Adam<T> opt_c(cfg.adam, model.coarse.params().size());
  std::optional<Adam<T>> opt_f;
  if (model.fine) opt_f.emplace(cfg.adam, model.fine->params().size());
  auto grads_c = model.coarse.params().zeros_like();
  auto grads_f = model.fine ? model.fine->params().zeros_like() : fields::ParameterSet<T>();

  const T bg = T(1), t_near = static_cast<T>(cfg.t_near), t_far = static_cast<T>(cfg.t_far);
  // Exponential decay from lr_initial to lr_final over the run.
  const double decay = std::log(cfg.lr_final / cfg.lr_initial);
  const int n = cfg.batch_rays;
  Mat3X<T> origins(3, n), dirs(3, n), target(3, n);
  const auto t0 = std::chrono::steady_clock::now();
  for (int step = 0; step < cfg.steps; ++step) {
    for (int r = 0; r < n; ++r) {
      const auto& f = frames[uniform_int(rng, 0, static_cast<int>(frames.size()) - 1)];
      const int x = uniform_int(rng, 0, k.width - 1), y = uniform_int(rng, 0, k.height - 1);
      const render::CameraModel cam{k, f.camera_to_world};
      origins.col(r) = cam.position().cast<T>();
      dirs.col(r) = cam.direction(x, y).cast<T>();
      for (int c = 0; c < 3; ++c) target(c, r) = static_cast<T>(f.image.at(x, y, c));
    }
    std::vector<T> depths;
    depths.reserve(static_cast<size_t>(n) * cfg.coarse_samples);
    for (int r = 0; r < n; ++r) {
      auto t = render::stratified_depths<T>(t_near, t_far, cfg.coarse_samples, &rng);
      depths.insert(depths.end(), t.begin(), t.end());
    }
    const auto coarse = detail::make_samples<T>(origins, dirs, depths, cfg.coarse_samples, t_far);
    grads_c.set_zero();
    std::vector<T> weights;
    double loss = detail::reconstruction_pass<T>(model.coarse, coarse, target, bg, grads_c,
                                              model.fine ? &weights : nullptr);
    if (model.fine) {
      grads_f.set_zero();
      std::vector<T> merged;
      const int kc = cfg.coarse_samples;
      for (int r = 0; r < n; ++r) {
        auto m = render::importance_depths<T>(std::span<const T>(depths.data() + r * kc, kc),
                                              std::span<const T>(weights.data() + r * kc, kc), t_near, t_far,
                                              cfg.fine_samples, &rng);
        merged.insert(merged.end(), m.begin(), m.end());
      }
      const auto fine = detail::make_samples<T>(origins, dirs, merged, kc + cfg.fine_samples, t_far);
      loss += detail::reconstruction_pass<T>(*model.fine, fine, target, bg, grads_f, nullptr);
    }
    const double lr = cfg.lr_initial * std::exp(decay * step / std::max(1, cfg.steps - 1));
    if (!std::isfinite(loss) || !grads_c.all_finite() || (model.fine && !grads_f.all_finite()))
      throw RuntimeFailure("pretrain diverged at step " + std::to_string(step) + " (loss " + std::to_string(loss) +
                           ", lr " + std::to_string(lr) + ")");
    opt_c.step(model.coarse.mutable_params(), grads_c, lr);
    if (model.fine) opt_f->step(model.fine->mutable_params(), grads_f, lr);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log::info("pretrain step {} loss {:.6f} psnr~{:.2f} lr {:.2e} ({:.1f}s)", step, loss,
                -10.0 * std::log10(std::max(loss, 1e-12)), lr, secs);
      if (on_log) on_log({step, loss, lr});
    }
  }
  model.set_trainable(false);
  return model;
}

}  // namespace nerfedit::train
