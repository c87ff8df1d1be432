// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/random.hpp"

namespace nerfedit::render {

struct Intrinsics {
  double focal = 0;  // pixels
  double cx = 0;
  double cy = 0;
  int width = 0;
  int height = 0;

  /// Pinhole intrinsics from a horizontal field of view, principal point centered.
  static Intrinsics from_fov(double fov_x_rad, int width, int height) {
    require(fov_x_rad > 0 && fov_x_rad < std::numbers::pi, "Intrinsics: fov out of range");
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.focal = 0.5 * width / std::tan(0.5 * fov_x_rad);
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    return k;
  }
  void validate() const {
    require(focal > 0, "Intrinsics: focal must be > 0");
    require(width > 0 && height > 0, "Intrinsics: image size must be positive");
  }
};

/// Camera-to-world rigid transform plus intrinsics. Camera looks down -z,
/// +y up in image, pixel rows grow downward.
struct CameraModel {
  Intrinsics intrinsics;
  Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();

  [[nodiscard]] Eigen::Vector3d position() const { return camera_to_world.block<3, 1>(0, 3); }

  /// Unit world-space direction through the center of pixel (px, py).
  [[nodiscard]] Eigen::Vector3d direction(double px, double py) const {
    const auto& k = intrinsics;
    Eigen::Vector3d d_cam((px + 0.5 - k.cx) / k.focal, -(py + 0.5 - k.cy) / k.focal, -1.0);
    return (camera_to_world.block<3, 3>(0, 0) * d_cam).normalized();
  }
};

/// Look-at pose with world up = +z.
inline Eigen::Matrix4d look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target = Eigen::Vector3d::Zero()) {
  Eigen::Vector3d z = (eye - target).normalized();
  Eigen::Vector3d up(0, 0, 1);
  if (up.cross(z).norm() < 1e-9) up = Eigen::Vector3d(0, 1, 0);
  Eigen::Vector3d x = up.cross(z).normalized();
  Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = x;
  m.block<3, 1>(0, 1) = y;
  m.block<3, 1>(0, 2) = z;
  m.block<3, 1>(0, 3) = eye;
  return m;
}

inline Eigen::Vector3d spherical_position(double radius, double azimuth_rad, double elevation_rad) {
  return {radius * std::cos(elevation_rad) * std::cos(azimuth_rad),
          radius * std::cos(elevation_rad) * std::sin(azimuth_rad), radius * std::sin(elevation_rad)};
}

/// Spherical band around the scene origin from which training poses are drawn.
struct CameraBounds {
  double radius_min = 4.0;
  double radius_max = 4.0;
  double elevation_min_deg = -5.0;
  double elevation_max_deg = 85.0;

  void validate() const {
    require(radius_min > 0 && radius_min <= radius_max, "CameraBounds: empty or invalid radius range");
    require(elevation_min_deg <= elevation_max_deg, "CameraBounds: empty elevation range");
    require(elevation_min_deg >= -90 && elevation_max_deg <= 90, "CameraBounds: elevation outside [-90, 90]");
  }
};

/// Position uniform by area over the band (z uniform in [sin e_min, sin e_max]),
/// azimuth uniform, radius uniform; camera looks at the origin.
inline CameraModel sample_camera_pose(Rng& rng, const CameraBounds& bounds, const Intrinsics& intrinsics) {
  bounds.validate();
  constexpr double deg = std::numbers::pi / 180.0;
  const double z0 = std::sin(bounds.elevation_min_deg * deg);
  const double z1 = std::sin(bounds.elevation_max_deg * deg);
  const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double s = z0 + (z1 - z0) * uniform01(rng);
  const double radius = bounds.radius_min + (bounds.radius_max - bounds.radius_min) * uniform01(rng);
  const double elevation = std::asin(std::clamp(s, -1.0, 1.0));
  CameraModel cam;
  cam.intrinsics = intrinsics;
  cam.camera_to_world = look_at(spherical_position(radius, azimuth, elevation));
  return cam;
}

}  // namespace nerfedit::render
