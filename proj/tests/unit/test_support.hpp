// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/checkpoint.hpp"
#include "nerfedit/render/composite.hpp"
#include "nerfedit/train/desk_scene.hpp"
#include "nerfedit/train/pretrain.hpp"

namespace nerfedit::testing {

/// Owning storage for one ray's per-sample quantities.
template <typename T>
struct RayData {
  Eigen::Array<T, 1, Eigen::Dynamic> delta, sigma_o, sigma_e, density_blend, color_blend;
  Mat3X<T> color_o, color_e;

  [[nodiscard]] render::BlendedRay<T> view() const {
    return {delta, sigma_o, color_o, sigma_e, color_e, density_blend, color_blend};
  }
};

template <typename T>
RayData<T> random_ray(Rng& rng, int k, double max_sigma = 5.0) {
  RayData<T> r;
  auto arr = [&](double lo, double hi) {
    Eigen::Array<T, 1, Eigen::Dynamic> a(k);
    for (int i = 0; i < k; ++i) a(i) = static_cast<T>(uniform(rng, lo, hi));
    return a;
  };
  auto col = [&] {
    Mat3X<T> c(3, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < 3; ++j) c(j, i) = static_cast<T>(uniform01(rng));
    return c;
  };
  r.delta = arr(0.01, 0.5);
  r.sigma_o = arr(0.0, max_sigma);
  r.sigma_e = arr(0.0, max_sigma);
  r.density_blend = arr(0.0, 1.0);
  r.color_blend = arr(0.0, 1.0);
  r.color_o = col();
  r.color_e = col();
  return r;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("nerfedit_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

#ifdef NERFEDIT_TEST_CACHE_DIR
/// Desk-profile model of the two-sphere scene, trained once per build tree.
/// Concurrent test processes each train and the first rename wins.
inline std::filesystem::path desk_pretrained_checkpoint() {
  namespace fs = std::filesystem;
  const fs::path cache = fs::path(NERFEDIT_TEST_CACHE_DIR) / "desk_pretrained";
  const fs::path manifest = cache / "model.json";
  if (fs::exists(manifest)) return manifest;
  const auto ds = train::make_desk_dataset(train::two_sphere_scene());
  const auto model = train::pretrain_scene<float>(ds, train::PretrainConfig::desk());
  const fs::path staging = fs::path(NERFEDIT_TEST_CACHE_DIR) / ("staging_" + std::to_string(::getpid()));
  fs::remove_all(staging);
  fs::create_directories(staging);
  fields::save_pretrained(staging / "model.json", model);
  std::error_code ec;
  fs::rename(staging, cache, ec);
  if (ec) fs::remove_all(staging);
  return manifest;
}
#endif

}  // namespace nerfedit::testing
