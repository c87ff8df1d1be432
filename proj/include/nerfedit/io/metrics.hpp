// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/objectives/embedding.hpp"

namespace nerfedit::io {

inline double manipulative_precision(double d_l1, double s_clip) { return (1.0 - d_l1) * s_clip; }

/// Below this norm an image or text difference has no direction.
inline constexpr double kDirectionalSimilarityEps = 1e-8;

struct ViewMetrics {
  double d_l1 = 0;
  double clip_similarity = 0;
  double directional_similarity = 0;
  double s_clip = 0;
  double mp = 0;
};

/// Aggregates are means over views; `mp` is computed from the aggregated
/// factors, `mp_view_mean` is the mean of the per-view values.
struct MetricReport {
  double d_l1 = 0;
  double clip_similarity = 0;
  double directional_similarity = 0;
  double s_clip = 0;
  double mp = 0;
  double mp_view_mean = 0;
  std::vector<ViewMetrics> views;

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : views)
      per.push_back({{"D_L1", v.d_l1},
                     {"clip_similarity", v.clip_similarity},
                     {"directional_similarity", v.directional_similarity},
                     {"S_CLIP", v.s_clip},
                     {"MP_CLIP", v.mp}});
    return {{"D_L1", d_l1},
            {"clip_similarity", clip_similarity},
            {"directional_similarity", directional_similarity},
            {"S_CLIP", s_clip},
            {"MP_CLIP", mp},
            {"MP_CLIP_view_mean", mp_view_mean},
            {"view_count", views.size()},
            {"views", per}};
  }
};

namespace detail {

inline double cosine_or_zero(const objectives::Embedding& a, const objectives::Embedding& b, const char* what) {
  const double na = a.norm(), nb = b.norm();
  if (na < kDirectionalSimilarityEps || nb < kDirectionalSimilarityEps) {
    log::warn("evaluate: degenerate {} (|a|={}, |b|={}); similarity set to 0", what, na, nb);
    return 0.0;
  }
  return a.dot(b) / (na * nb);
}

}  // namespace detail

/// D_L1 over pixels and channels of [0,1] images, CLIP similarity of the
/// edited view to the target text, directional similarity of the image
/// change to the text change, S_CLIP their mean, MP = (1 - D_L1) S_CLIP.
template <typename T>
MetricReport evaluate(const std::vector<Image<T>>& original, const std::vector<Image<T>>& edited,
                      const std::string& source_text, const std::string& target_text,
                      objectives::EmbeddingProvider& provider) {
  require(original.size() == edited.size(), "evaluate: " + std::to_string(original.size()) + " original views but " +
                                                 std::to_string(edited.size()) + " edited views");
  require(!original.empty(), "evaluate: no views");
  const auto t_src = provider.embed_text(source_text);
  const auto t_tgt = provider.embed_text(target_text);
  const objectives::Embedding dt = t_tgt - t_src;
  MetricReport r;
  for (size_t i = 0; i < original.size(); ++i) {
    require(original[i].same_shape(edited[i]), "evaluate: view " + std::to_string(i) + " differs in shape");
    const auto o = original[i].template cast<double>();
    const auto e = edited[i].template cast<double>();
    ViewMetrics v;
    v.d_l1 = mean_abs_difference(o, e);
    const auto eo = provider.embed_image(o);
    const auto ee = provider.embed_image(e);
    v.clip_similarity = detail::cosine_or_zero(ee, t_tgt, "image/text embedding");
    v.directional_similarity = detail::cosine_or_zero(ee - eo, dt, "edit direction");
    v.s_clip = 0.5 * (v.clip_similarity + v.directional_similarity);
    v.mp = manipulative_precision(v.d_l1, v.s_clip);
    r.views.push_back(v);
  }
  const double inv = 1.0 / static_cast<double>(r.views.size());
  for (const auto& v : r.views) {
    r.d_l1 += inv * v.d_l1;
    r.clip_similarity += inv * v.clip_similarity;
    r.directional_similarity += inv * v.directional_similarity;
    r.mp_view_mean += inv * v.mp;
  }
  r.s_clip = 0.5 * (r.clip_similarity + r.directional_similarity);
  r.mp = manipulative_precision(r.d_l1, r.s_clip);
  return r;
}

}  // namespace nerfedit::io
