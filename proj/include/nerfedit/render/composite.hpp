// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <type_traits>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/fields/radiance_field.hpp"

namespace nerfedit::render {

template <typename T>
using ArrayRef = Eigen::Ref<const Eigen::Array<T, 1, Eigen::Dynamic>>;
template <typename T>
using ColorRef = Eigen::Ref<const Mat3X<T>>;

/// Rays whose summed original alpha is below this contribute zero removal.
inline constexpr double kRemoveDenominatorEps = 1e-8;

/// (sigma_o', c_o') from the original sample and the editable outputs.
template <typename T>
std::pair<T, Vec3<T>> blend_samples(const fields::FieldOutput<T>& o, const fields::EditableOutput<T>& e) {
  const T sigma = (T(1) - e.density_blend) * o.density;
  const Vec3<T> color = (T(1) - e.color_blend) * o.color + e.color_blend * e.color;
  return {sigma, color};
}

template <typename T>
inline T alpha_from(T sigma, T delta) {
  return -std::expm1(-sigma * delta);
}

/// Exclusive transmittance T_k = prod_{j<k} (1 - alpha_j), K+1 entries (last = T after the ray).
template <typename T>
std::vector<T> transmittance(ArrayRef<T> sigma, ArrayRef<T> delta) {
  std::vector<T> t(sigma.size() + 1);
  T optical = T(0);
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    t[k] = std::exp(-optical);
    optical += sigma(k) * delta(k);
  }
  t.back() = std::exp(-optical);
  return t;
}

template <typename T>
struct OriginalComposite {
  Vec3<T> color = Vec3<T>::Zero();  // before background
  T opacity{};                      // sum_k T_k alpha_k
};

template <typename T>
OriginalComposite<T> composite_original(ArrayRef<T> delta, ArrayRef<T> sigma, ColorRef<T> color) {
  OriginalComposite<T> out;
  T trans = T(1);
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    const T a = alpha_from(sigma(k), delta(k));
    const T w = trans * a;
    out.color += w * color.col(k);
    out.opacity += w;
    trans *= (T(1) - a);
  }
  return out;
}

/// Gradients of composite_original w.r.t. per-sample density and color.
/// Cotangents: on the pre-background color and on the accumulated opacity.
template <typename T>
void composite_original_backward(ArrayRef<T> delta, ArrayRef<T> sigma, ColorRef<T> color, const Vec3<T>& g_color,
                                 T g_opacity, Eigen::Ref<Eigen::Array<T, 1, Eigen::Dynamic>> d_sigma,
                                 Eigen::Ref<Mat3X<T>> d_color) {
  const Eigen::Index n = sigma.size();
  const auto trans = transmittance<T>(sigma, delta);
  std::vector<T> payload(n), alpha(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    alpha[k] = alpha_from(sigma(k), delta(k));
    payload[k] = g_color.dot(color.col(k));
  }
  // suffix = sum_{m>k} T_m alpha_m P_m
  T suffix = T(0);
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    d_color.col(k) += trans[k] * alpha[k] * g_color;
    d_sigma(k) += delta(k) * (trans[k + 1] * payload[k] - suffix + g_opacity * trans[n]);
    suffix += trans[k] * alpha[k] * payload[k];
  }
}

template <typename T>
struct BlendedComposite {
  Vec3<T> blended = Vec3<T>::Zero();   // C^b before background
  Vec3<T> editable = Vec3<T>::Zero();  // C^e (never background-composited)
  T add{};
  T remove{};
  T change{};
  T opacity{};  // sum_k T^b_k alpha^b_k
};

/// Per-sample quantities of one ray used by composite_blended.
template <typename T>
struct BlendedRay {
  ArrayRef<T> delta;
  ArrayRef<T> sigma_o;
  ColorRef<T> color_o;
  ArrayRef<T> sigma_e;
  ColorRef<T> color_e;
  ArrayRef<T> density_blend;
  ArrayRef<T> color_blend;
};

/// Optional per-sample transmittances (K+1 entries each).
template <typename T>
struct BlendedTrace {
  std::vector<T> t_blended, t_original, t_modified;
  std::vector<T> weights;  // T^b_k alpha^b_k, used for importance sampling
};

template <typename T>
BlendedComposite<T> composite_blended(const BlendedRay<T>& r, BlendedTrace<T>* trace = nullptr) {
  const Eigen::Index n = r.delta.size();
  BlendedComposite<T> out;
  T tb = T(1), to = T(1), top = T(1);
  T removed_num = T(0), alpha_o_sum = T(0);
  if (trace) {
    trace->t_blended.assign(n + 1, T(0));
    trace->t_original.assign(n + 1, T(0));
    trace->t_modified.assign(n + 1, T(0));
    trace->weights.assign(n, T(0));
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const T sigma_mod = (T(1) - r.density_blend(k)) * r.sigma_o(k);
    const Vec3<T> color_mod = (T(1) - r.color_blend(k)) * r.color_o.col(k) + r.color_blend(k) * r.color_e.col(k);
    const T a_mod = alpha_from(sigma_mod, r.delta(k));
    const T a_e = alpha_from(r.sigma_e(k), r.delta(k));
    const T a_b = alpha_from(sigma_mod + r.sigma_e(k), r.delta(k));
    const T a_o = alpha_from(r.sigma_o(k), r.delta(k));
    if (trace) {
      trace->t_blended[k] = tb;
      trace->t_original[k] = to;
      trace->t_modified[k] = top;
      trace->weights[k] = tb * a_b;
    }
    out.blended += tb * (a_mod * color_mod + a_e * r.color_e.col(k));
    out.editable += tb * (a_mod * r.color_blend(k) + a_e) * r.color_e.col(k);
    out.add += tb * a_e;
    out.change += tb * a_mod * r.color_blend(k);
    out.opacity += tb * a_b;
    removed_num += (top - to) * a_o;
    alpha_o_sum += a_o;
    tb *= (T(1) - a_b);
    to *= (T(1) - a_o);
    top *= (T(1) - a_mod);
  }
  out.remove = alpha_o_sum < T(kRemoveDenominatorEps) ? T(0) : removed_num / alpha_o_sum;
  if (trace) {
    trace->t_blended[n] = tb;
    trace->t_original[n] = to;
    trace->t_modified[n] = top;
  }
  return out;
}

/// Upstream gradients for one ray's blended outputs.
template <typename T>
struct BlendedCotangent {
  Vec3<T> blended = Vec3<T>::Zero();
  Vec3<T> editable = Vec3<T>::Zero();
  T add{};
  T remove{};
  T change{};
  T opacity{};
};

/// Which editable quantities a given opacity patch may send gradient to.
/// Full: exact derivatives. StopGradient: the accumulated opacity for
/// adding reaches only sigma_e, removal only beta_sigma, change only beta_c;
/// color outputs are unrestricted.
enum class GradientRouting { Full, StopGradient };

/// Gradients w.r.t. sigma_e, beta_sigma, beta_c and c_e (accumulated into the out refs).
template <typename T>
void composite_blended_backward(const BlendedRay<T>& r, const BlendedCotangent<T>& g, GradientRouting routing,
                                std::type_identity_t<Eigen::Ref<Eigen::Array<T, 1, Eigen::Dynamic>>> d_sigma_e,
                                std::type_identity_t<Eigen::Ref<Mat3X<T>>> d_color_e,
                                std::type_identity_t<Eigen::Ref<Eigen::Array<T, 1, Eigen::Dynamic>>> d_density_blend,
                                std::type_identity_t<Eigen::Ref<Eigen::Array<T, 1, Eigen::Dynamic>>> d_color_blend) {
  const Eigen::Index n = r.delta.size();
  const bool full = routing == GradientRouting::Full;
  std::vector<T> tb(n + 1), top(n + 1), a_mod(n), a_e(n), a_o(n), sigma_mod(n);
  std::vector<Vec3<T>> color_mod(n);
  T t_b = T(1), t_mod = T(1), alpha_o_sum = T(0);
  for (Eigen::Index k = 0; k < n; ++k) {
    sigma_mod[k] = (T(1) - r.density_blend(k)) * r.sigma_o(k);
    color_mod[k] = (T(1) - r.color_blend(k)) * r.color_o.col(k) + r.color_blend(k) * r.color_e.col(k);
    a_mod[k] = alpha_from(sigma_mod[k], r.delta(k));
    a_e[k] = alpha_from(r.sigma_e(k), r.delta(k));
    a_o[k] = alpha_from(r.sigma_o(k), r.delta(k));
    alpha_o_sum += a_o[k];
    tb[k] = t_b;
    top[k] = t_mod;
    t_b *= (T(1) - a_mod[k]) * (T(1) - a_e[k]);
    t_mod *= (T(1) - a_mod[k]);
  }
  tb[n] = t_b;
  top[n] = t_mod;

  const T g_add_full = full ? g.add : T(0);
  const T g_add_routed = full ? T(0) : g.add;
  const T g_change_full = full ? g.change : T(0);

  // Each output is sum_k T^b_k P_k with a per-sample payload P_k; the
  // transmittance path contributes -delta_j * sum_{k>j} T^b_k P_k to the
  // derivative w.r.t. sigma^b_j. Routed add-opacity terms reach sigma_e only.
  T suffix_full = T(0), suffix_add = T(0);
  const bool remove_active = alpha_o_sum >= T(kRemoveDenominatorEps);
  T suffix_removed = T(0);  // sum_{k>j} T^o'_k alpha^o_k
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Vec3<T> ce = r.color_e.col(k);
    const T bc = r.color_blend(k);
    const T ge_ce = g.editable.dot(ce);
    const T payload_full = g.blended.dot(a_mod[k] * color_mod[k] + a_e[k] * ce) + ge_ce * (a_mod[k] * bc + a_e[k]) +
                           g_add_full * a_e[k] + g_change_full * a_mod[k] * bc;
    const T payload_add = g_add_routed * a_e[k];

    const T dP_da_mod = g.blended.dot(color_mod[k]) + ge_ce * bc + g_change_full * bc;
    const T dP_da_e_full = g.blended.dot(ce) + ge_ce + g_add_full;
    const T d_tpath_full = -r.delta(k) * suffix_full + g.opacity * r.delta(k) * tb[n];
    const T d_tpath_add = -r.delta(k) * suffix_add;

    const T one_minus_a_e = T(1) - a_e[k];
    const T one_minus_a_mod = T(1) - a_mod[k];
    // sigma^b = sigma_o' + sigma_e
    d_sigma_e(k) += tb[k] * (dP_da_e_full + g_add_routed) * r.delta(k) * one_minus_a_e + d_tpath_full + d_tpath_add;
    // sigma_o' = (1 - beta_sigma) sigma_o
    T d_sigma_mod = tb[k] * dP_da_mod * r.delta(k) * one_minus_a_mod + d_tpath_full;
    if (remove_active) d_sigma_mod += g.remove * (-r.delta(k) * suffix_removed) / alpha_o_sum;
    d_density_blend(k) += -r.sigma_o(k) * d_sigma_mod;

    const Vec3<T> d_ce_from_mod = g.blended * (tb[k] * a_mod[k] * bc);
    d_color_e.col(k) += d_ce_from_mod + (g.blended + g.editable) * (tb[k] * a_e[k]) +
                        g.editable * (tb[k] * a_mod[k] * bc);
    d_color_blend(k) += tb[k] * a_mod[k] * (g.blended.dot(ce - r.color_o.col(k)) + ge_ce + g.change);

    suffix_full += tb[k] * payload_full;
    suffix_add += tb[k] * payload_add;
    suffix_removed += top[k] * a_o[k];
  }
}

}  // namespace nerfedit::render
