// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/io/png.hpp"
#include "nerfedit/localize/mask.hpp"
#include "nerfedit/localize/providers.hpp"
#include "nerfedit/render/camera.hpp"
#include "nerfedit/render/sampling.hpp"

namespace nerfedit::localize {

inline constexpr const char* kBaseText = "photo";
inline constexpr int kDefaultDilations = 10;
inline constexpr int kDilationKernel = 5;

/// M (target), M+ (positive region) and M- (negative region) with the
/// weight on the positive term of the region loss.
struct RegionMasks {
  Mask target;
  Mask positive;
  Mask negative;
  double lambda_plus = 1.0;
  int dilations = kDefaultDilations;
};

/// max(30, (S^2 - |M+|) / (1 + |M+|)), with S^2 the pixel count of the map.
inline double lambda_plus_ratio(size_t positive_area, size_t pixel_count) {
  const double a = static_cast<double>(positive_area);
  return std::max(30.0, (static_cast<double>(pixel_count) - a) / (1.0 + a));
}

inline double lambda_plus_ratio(const Mask& positive) { return lambda_plus_ratio(area(positive), positive.pixel_count()); }

/// M = 1 where h(I, text) - h(I, "photo") > 0, at the provider's resolution.
inline Mask target_region_native(const Image<float>& patch, const std::string& text, SegmentationProvider& provider) {
  const int res = provider.resolution();
  const Image<float> resized = (patch.width == res && patch.height == res) ? patch : resize_bilinear(patch, res, res);
  const Image<float> p_text = provider.segment(resized, text);
  const Image<float> p_base = provider.segment(resized, kBaseText);
  require(p_text.width == res && p_text.height == res && p_base.same_shape(p_text),
          "segmentation provider returned a map at the wrong resolution");
  Mask m = make_mask(res, res);
  for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = (p_text.data[i] - p_base.data[i] > 0.0f) ? 1 : 0;
  return m;
}

/// Target region for an S x S patch, resized back to the patch by nearest neighbor.
inline Mask target_region(const Image<float>& patch, const std::string& text, SegmentationProvider& provider) {
  return resize_nearest(target_region_native(patch, text, provider), patch.width, patch.height);
}

/// M+ = dilate(M, N_f); M- = not dilate(M+, N_f). lambda_plus from the
/// ratio rule when adding density is enabled, else 1.
inline RegionMasks build_regions(const Mask& target, int dilations, bool add_enabled) {
  RegionMasks r;
  r.target = binarize(target);
  r.dilations = dilations;
  r.positive = dilate(r.target, dilations, kDilationKernel);
  r.negative = logical_not(dilate(r.positive, dilations, kDilationKernel));
  r.lambda_plus = add_enabled ? lambda_plus_ratio(r.positive) : 1.0;
  return r;
}

inline RegionMasks resize_regions(const RegionMasks& r, int w, int h, bool add_enabled) {
  RegionMasks out;
  out.dilations = r.dilations;
  out.target = resize_nearest(r.target, w, h);
  out.positive = resize_nearest(r.positive, w, h);
  out.negative = resize_nearest(r.negative, w, h);
  out.lambda_plus = add_enabled ? lambda_plus_ratio(out.positive) : 1.0;
  return out;
}

/// Full pipeline for one rendered patch: segment at the provider
/// resolution, dilate there, then resize all three maps to the patch.
inline RegionMasks localize(const Image<float>& patch, const std::string& text, SegmentationProvider& provider,
                            int dilations, bool add_enabled) {
  const Mask native = target_region_native(patch, text, provider);
  return resize_regions(build_regions(native, dilations, add_enabled), patch.width, patch.height, add_enabled);
}

// ---------------------------------------------------------------------------
// User-provided masks

enum class UserMaskKind { NoiseRemoval, RegionSpecification };

struct UserMaskView {
  Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();
  Mask mask;
};

struct UserMaskSet {
  UserMaskKind kind = UserMaskKind::NoiseRemoval;
  std::vector<UserMaskView> views;
};

/// Manifest: {"kind": "noise_removal" | "region_specification",
///            "views": [{"file": "<png>", "transform_matrix": [[4x4]]}]}
/// Files are 8-bit single-channel PNGs, nonzero = selected.
inline UserMaskSet load_user_masks(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ValidationError("user masks: cannot open " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("user masks: malformed manifest: ") + e.what());
  }
  UserMaskSet set;
  const std::string kind = j.at("kind");
  if (kind == "noise_removal") set.kind = UserMaskKind::NoiseRemoval;
  else if (kind == "region_specification") set.kind = UserMaskKind::RegionSpecification;
  else throw ValidationError("user masks: unknown kind '" + kind + "'");
  for (const auto& v : j.at("views")) {
    UserMaskView view;
    const auto& m = v.at("transform_matrix");
    require(m.size() == 4, "user masks: transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
      require(m[r].size() == 4, "user masks: transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) view.camera_to_world(r, c) = m[r][c].get<double>();
    }
    auto img = io::read_png(manifest.parent_path() / v.at("file").get<std::string>());
    require(img.channels == 1, "user masks: mask files must be single-channel");
    view.mask = binarize(img);
    set.views.push_back(std::move(view));
  }
  require(!set.views.empty(), "user masks: manifest lists no views");
  return set;
}

/// The view whose camera position is angularly closest to `cam`.
inline const UserMaskView& nearest_view(const UserMaskSet& set, const render::CameraModel& cam) {
  const Eigen::Vector3d p = cam.position().normalized();
  size_t best = 0;
  double best_cos = -2;
  for (size_t i = 0; i < set.views.size(); ++i) {
    const double c = set.views[i].camera_to_world.block<3, 1>(0, 3).normalized().dot(p);
    if (c > best_cos) {
      best_cos = c;
      best = i;
    }
  }
  return set.views[best];
}

/// User target for a ray patch: gathered at the patch pixels when the mask
/// has the camera's resolution, otherwise nearest-resampled (with a warning).
template <typename T>
Mask user_target_for_patch(const UserMaskSet& set, const render::RayPatch<T>& patch) {
  const auto& view = nearest_view(set, patch.camera);
  const auto& k = patch.camera.intrinsics;
  if (view.mask.width == k.width && view.mask.height == k.height) {
    Mask m = make_mask(patch.cols, patch.rows);
    for (int i = 0; i < patch.size(); ++i) m.data[i] = view.mask.at(patch.pixels[i].x, patch.pixels[i].y) ? 1 : 0;
    return m;
  }
  log::warn("user mask is {}x{} but the camera is {}x{}; resampling", view.mask.width, view.mask.height, k.width,
            k.height);
  return resize_nearest(view.mask, patch.cols, patch.rows);
}

/// Regions from a user target, dilated at `work_resolution` like the
/// segmentation path.
inline RegionMasks regions_from_user_target(const Mask& target, int work_resolution, int dilations, bool add_enabled) {
  const Mask up = resize_nearest(target, work_resolution, work_resolution);
  return resize_regions(build_regions(up, dilations, add_enabled), target.width, target.height, add_enabled);
}

enum class MaskSource { Segmentation, User };

inline constexpr int kUserMaskPeriod = 5;

/// Region-specification masks always replace segmentation; noise-removal
/// masks replace it on every fifth step.
inline MaskSource mask_source(int step, const UserMaskSet* user) {
  if (!user) return MaskSource::Segmentation;
  if (user->kind == UserMaskKind::RegionSpecification) return MaskSource::User;
  return step % kUserMaskPeriod == 0 ? MaskSource::User : MaskSource::Segmentation;
}

/// Picks the mask source for `step` and calls only the matching producer.
template <typename AutoFn, typename UserFn>
RegionMasks resolve_masks(int step, const UserMaskSet* user, AutoFn&& auto_masks, UserFn&& user_masks) {
  if (mask_source(step, user) == MaskSource::User) return user_masks(*user);
  return auto_masks();
}

}  // namespace nerfedit::localize
