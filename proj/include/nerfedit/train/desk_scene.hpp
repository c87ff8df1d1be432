// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/io/scene.hpp"
#include "nerfedit/render/camera.hpp"

namespace nerfedit::train {

struct SoftSphere {
  Vec3<double> center;
  double radius = 0.5;
  Vec3<double> color;
};

/// Volumetric spheres with a linear density ramp of width `edge` across
/// each surface and Lambert-tinted flat colors. Used as ground truth for
/// the desk-scale reconstruction.
struct ProceduralScene {
  std::vector<SoftSphere> spheres;
  double peak_density = 40.0;
  double edge = 0.1;
  Vec3<double> light = Vec3<double>(0.3, -0.5, 0.8).normalized();

  [[nodiscard]] double density(const Vec3<double>& x, Vec3<double>* color = nullptr) const {
    double total = 0;
    Vec3<double> weighted = Vec3<double>::Zero();
    for (const auto& s : spheres) {
      const Vec3<double> off = x - s.center;
      const double r = off.norm();
      const double d = peak_density * std::clamp((s.radius - r) / edge + 0.5, 0.0, 1.0);
      if (d <= 0) continue;
      total += d;
      const double shade = 0.75 + 0.25 * std::max(0.0, r > 0 ? off.dot(light) / r : 0.0);
      weighted += d * shade * s.color;
    }
    if (color) *color = total > 0 ? Vec3<double>(weighted / total) : Vec3<double>::Zero();
    return total;
  }

  /// Midpoint-rule volume rendering over white.
  [[nodiscard]] Image<float> render(const render::CameraModel& cam, double t_near = 2.0, double t_far = 6.0,
                                    int samples = 512) const {
    const auto& k = cam.intrinsics;
    Image<float> img(k.width, k.height, 3);
    const Vec3<double> o = cam.position();
    const double dt = (t_far - t_near) / samples;
    for (int y = 0; y < k.height; ++y)
      for (int x = 0; x < k.width; ++x) {
        const Vec3<double> d = cam.direction(x, y);
        double trans = 1.0;
        Vec3<double> c = Vec3<double>::Zero();
        for (int i = 0; i < samples && trans > 1e-6; ++i) {
          Vec3<double> col;
          const double s = density(o + (t_near + (i + 0.5) * dt) * d, &col);
          if (s <= 0) continue;
          const double a = -std::expm1(-s * dt);
          c += trans * a * col;
          trans *= 1.0 - a;
        }
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = static_cast<float>(c(ch) + trans);
      }
    return img;
  }
};

inline const Vec3<double> kDeskRed(0.9, 0.1, 0.1);
inline const Vec3<double> kDeskBlue(0.1, 0.2, 0.9);

/// A red sphere and a blue sphere side by side on the x axis.
inline ProceduralScene two_sphere_scene() {
  ProceduralScene s;
  s.spheres = {{Vec3<double>(0.6, 0.0, 0.0), 0.5, kDeskRed}, {Vec3<double>(-0.6, 0.0, 0.0), 0.5, kDeskBlue}};
  return s;
}

struct DeskSceneOptions {
  int train_views = 20;
  int val_views = 2;
  int test_views = 5;
  int size = 64;
  double fov_x = 0.6911112070083618;
  uint64_t seed = 2024;
  render::CameraBounds bounds{};
};

inline io::SceneDataset make_desk_dataset(const ProceduralScene& scene, const DeskSceneOptions& opt = {}) {
  io::SceneDataset ds;
  ds.camera_angle_x = opt.fov_x;
  ds.width = ds.height = opt.size;
  const auto k = ds.intrinsics();
  Rng rng(opt.seed);
  auto views = [&](const std::string& split, int n) {
    auto& frames = ds.splits[split];
    for (int i = 0; i < n; ++i) {
      const auto cam = render::sample_camera_pose(rng, opt.bounds, k);
      frames.push_back({"", cam.camera_to_world, scene.render(cam)});
    }
  };
  views("train", opt.train_views);
  if (opt.val_views > 0) views("val", opt.val_views);
  if (opt.test_views > 0) views("test", opt.test_views);
  return ds;
}

}  // namespace nerfedit::train
