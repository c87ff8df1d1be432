// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/localize/regions.hpp"
#include "nerfedit/objectives/embedding.hpp"
#include "nerfedit/objectives/schedule.hpp"
#include "nerfedit/render/toggles.hpp"

namespace nerfedit::objectives {

struct LossWeights {
  double lambda_global = 0.5;
  double lambda_region = 1.0;
  double lambda_opacity = 2.0;
  double lambda_reg = 0.2;
  // L_reg joins the total from this step on.
  int reg_start_step = 1000;

  void validate() const {
    for (double v : {lambda_global, lambda_region, lambda_opacity, lambda_reg})
      require(std::isfinite(v) && v >= 0, "LossWeights: weights must be finite and nonnegative");
    require(reg_start_step >= 0, "LossWeights: reg_start_step must be >= 0");
  }
};

/// Cosine similarity; optionally d cos / d a.
inline double cosine(const Embedding& a, const Embedding& b, Embedding* grad_a = nullptr) {
  require(a.size() == b.size(), "cosine: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0)) throw ValidationError("cosine: zero-norm embedding");
  const double c = a.dot(b) / (na * nb);
  if (grad_a) *grad_a = b / (na * nb) - c * a / (na * na);
  return c;
}

/// 1 - cos(E_img, E_txt) from precomputed embeddings.
inline double global_loss(const Embedding& image, const Embedding& text, Embedding* grad_image = nullptr) {
  Embedding g;
  const double c = cosine(image, text, grad_image ? &g : nullptr);
  if (grad_image) *grad_image = -g;
  return 1.0 - c;
}

inline constexpr double kDirectionEps = 1e-8;

/// 1 - cos(dI, dT) with dI = target image - source image embedding,
/// dT = target text - source text embedding. Degenerate directions give 0.
inline double directional_loss(const Embedding& image_tgt, const Embedding& image_src, const Embedding& text_tgt,
                               const Embedding& text_src, Embedding* grad_image_tgt = nullptr) {
  const Embedding di = image_tgt - image_src;
  const Embedding dt = text_tgt - text_src;
  if (di.norm() <= kDirectionEps || dt.norm() <= kDirectionEps) {
    log::warn("directional loss: degenerate direction (|dI|={}, |dT|={}); contributing 0", di.norm(), dt.norm());
    if (grad_image_tgt) *grad_image_tgt = Embedding::Zero(image_tgt.size());
    return 0.0;
  }
  Embedding g;
  const double c = cosine(di, dt, grad_image_tgt ? &g : nullptr);
  if (grad_image_tgt) *grad_image_tgt = -g;
  return 1.0 - c;
}

inline double global_clip_loss(const Image<double>& image, const std::string& text, EmbeddingProvider& provider,
                               Image<double>* grad = nullptr) {
  const Embedding ei = provider.embed_image(image);
  Embedding g;
  const double v = global_loss(ei, provider.embed_text(text), grad ? &g : nullptr);
  if (grad) *grad = provider.embed_image_vjp(image, g);
  return v;
}

inline double directional_clip_loss(const Image<double>& image_tgt, const std::string& text_tgt,
                                    const Image<double>& image_src, const std::string& text_src,
                                    EmbeddingProvider& provider, Image<double>* grad_tgt = nullptr) {
  const Embedding et = provider.embed_image(image_tgt);
  Embedding g;
  const double v = directional_loss(et, provider.embed_image(image_src), provider.embed_text(text_tgt),
                                    provider.embed_text(text_src), grad_tgt ? &g : nullptr);
  if (grad_tgt) *grad_tgt = provider.embed_image_vjp(image_tgt, g);
  return v;
}

/// One augmented view triple plus its aligned text pair.
struct ClipSample {
  Image<double> original, editable, blended;
  std::string source_text, target_text;
};

struct ClipObjectiveResult {
  double value = 0;
  double directional = 0;
  double global_blended = 0;
  double global_editable = 0;
  std::vector<Image<double>> grad_blended, grad_editable;
};

/// L_dir(I^b, T_tgt, I^o, T_src) + lambda_global (L_global(I^b) + L_global(I^e)),
/// averaged over the batch. Gradients are w.r.t. each augmented image.
inline ClipObjectiveResult clip_objective(const std::vector<ClipSample>& batch, double lambda_global,
                                          EmbeddingProvider& provider, bool need_grad) {
  require(!batch.empty(), "clip_objective: empty batch");
  ClipObjectiveResult r;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const Embedding eo = provider.embed_image(s.original);
    const Embedding eb = provider.embed_image(s.blended);
    const Embedding ee = provider.embed_image(s.editable);
    const Embedding ts = provider.embed_text(s.source_text);
    const Embedding tt = provider.embed_text(s.target_text);
    Embedding g_dir, g_gb, g_ge;
    const double ld = directional_loss(eb, eo, tt, ts, need_grad ? &g_dir : nullptr);
    const double lb = global_loss(eb, tt, need_grad ? &g_gb : nullptr);
    const double le = global_loss(ee, tt, need_grad ? &g_ge : nullptr);
    r.directional += inv * ld;
    r.global_blended += inv * lb;
    r.global_editable += inv * le;
    if (need_grad) {
      const Embedding gb = inv * (g_dir + lambda_global * g_gb);
      const Embedding ge = inv * lambda_global * g_ge;
      r.grad_blended.push_back(provider.embed_image_vjp(s.blended, gb));
      r.grad_editable.push_back(provider.embed_image_vjp(s.editable, ge));
    }
  }
  r.value = r.directional + lambda_global * (r.global_blended + r.global_editable);
  return r;
}

/// Masked-mean region loss on E_sum = add + remove + change:
///   mean_{M-} E_sum^2 + lambda_plus * mean_{M+} (1 - E_sum)^2.
/// An empty mask contributes 0. `grad_sum` receives dL/dE_sum.
inline double region_loss(const Image<double>& add, const Image<double>& remove, const Image<double>& change,
                          const localize::RegionMasks& masks, Image<double>* grad_sum = nullptr) {
  require(add.same_shape(remove) && add.same_shape(change), "region_loss: opacity patches differ in shape");
  require(masks.positive.width == add.width && masks.positive.height == add.height &&
              masks.negative.same_shape(masks.positive),
          "region_loss: masks and patches differ in shape");
  const size_t n_pos = localize::area(masks.positive), n_neg = localize::area(masks.negative);
  if (grad_sum) *grad_sum = Image<double>(add.width, add.height, 1);
  double neg = 0, pos = 0;
  for (size_t i = 0; i < add.data.size(); ++i) {
    const double e = add.data[i] + remove.data[i] + change.data[i];
    if (masks.negative.data[i]) {
      neg += e * e / double(n_neg);
      if (grad_sum) grad_sum->data[i] += 2.0 * e / double(n_neg);
    }
    if (masks.positive.data[i]) {
      pos += (1.0 - e) * (1.0 - e) / double(n_pos);
      if (grad_sum) grad_sum->data[i] += -2.0 * masks.lambda_plus * (1.0 - e) / double(n_pos);
    }
  }
  return neg + masks.lambda_plus * pos;
}

struct OpacityValues {
  double add = 0;
  double remove = 0;
  double change = 0;
};

/// Threshold schedules. tau_remove is held constant; per-task targets for
/// add and change have no universal default and must be configured.
struct OpacityThresholds {
  AnnealSchedule add{0.8, std::numeric_limits<double>::quiet_NaN(), 100};
  AnnealSchedule remove = AnnealSchedule::constant(0.05);
  AnnealSchedule change{0.5, std::numeric_limits<double>::quiet_NaN(), 100};

  [[nodiscard]] OpacityValues at(int step) const { return {anneal(add, step), anneal(remove, step), anneal(change, step)}; }

  void validate(const render::EditOps& ops) const {
    auto check = [](const AnnealSchedule& s, const char* name) {
      require(std::isfinite(s.start) && std::isfinite(s.target), std::string("thresholds: ") + name + " must be set");
      require(s.start >= 0 && s.start <= 1 && s.target >= 0 && s.target <= 1,
              std::string("thresholds: ") + name + " must lie in [0,1]");
      require(s.steps >= 0, std::string("thresholds: ") + name + " anneal steps must be >= 0");
    };
    if (ops.add) check(add, "tau_add");
    if (ops.remove) check(remove, "tau_remove");
    if (ops.change) check(change, "tau_change");
  }
};

template <typename T>
double mean_of(const Image<T>& img) {
  if (img.data.empty()) return 0.0;
  double s = 0;
  for (T v : img.data) s += double(v);
  return s / double(img.data.size());
}

/// sum over enabled x of max(tau_x, mean(E_x)). `d_means` receives the
/// derivative w.r.t. each mean (1 above threshold, 0 otherwise).
inline double opacity_loss(const OpacityValues& means, const OpacityValues& tau, const render::EditOps& ops,
                           OpacityValues* d_means = nullptr) {
  double v = 0;
  OpacityValues d;
  if (ops.add) {
    v += std::max(tau.add, means.add);
    d.add = means.add > tau.add ? 1.0 : 0.0;
  }
  if (ops.remove) {
    v += std::max(tau.remove, means.remove);
    d.remove = means.remove > tau.remove ? 1.0 : 0.0;
  }
  if (ops.change) {
    v += std::max(tau.change, means.change);
    d.change = means.change > tau.change ? 1.0 : 0.0;
  }
  if (d_means) *d_means = d;
  return v;
}

inline constexpr double kEntropyClamp = 1e-6;

/// -(z log2 z + (1-z) log2(1-z)) with z clamped to [eps, 1-eps].
inline double binary_entropy(double z) {
  z = std::clamp(z, kEntropyClamp, 1.0 - kEntropyClamp);
  return -(z * std::log2(z) + (1 - z) * std::log2(1 - z));
}

/// -mean(F(E_add)); `grad` gets dL/dE_add (zero where the clamp is active).
inline double reg_loss(const Image<double>& add, Image<double>* grad = nullptr) {
  require(!add.data.empty(), "reg_loss: empty patch");
  const double inv = 1.0 / double(add.data.size());
  if (grad) *grad = Image<double>(add.width, add.height, 1);
  double v = 0;
  for (size_t i = 0; i < add.data.size(); ++i) {
    const double z = add.data[i];
    v += inv * binary_entropy(z);
    if (grad && z > kEntropyClamp && z < 1.0 - kEntropyClamp) grad->data[i] = inv * std::log2((1 - z) / z);
  }
  return v;
}

struct LossTerms {
  double clip = 0;
  double region = 0;
  double opacity = 0;
  double reg = 0;
};

inline bool reg_active(const LossWeights& w, int step) { return step >= w.reg_start_step; }

/// L_clip + l1 L_region + l2 L_opacity + l3 L_reg (L_reg only once active).
inline double total_loss(const LossTerms& t, const LossWeights& w, int step) {
  double v = t.clip + w.lambda_region * t.region + w.lambda_opacity * t.opacity;
  if (reg_active(w, step)) v += w.lambda_reg * t.reg;
  return v;
}

enum class OpacityKind { Add, Remove, Change };

/// Editable outputs that a loss on the given opacity patch may update.
struct EditableChannels {
  bool density = false;
  bool density_blend = false;
  bool color_blend = false;
  bool color = false;
};

constexpr EditableChannels routed_channels(OpacityKind k) {
  switch (k) {
    case OpacityKind::Add:
      return {true, false, false, false};
    case OpacityKind::Remove:
      return {false, true, false, false};
    case OpacityKind::Change:
      return {false, false, true, false};
  }
  return {};
}

}  // namespace nerfedit::objectives
