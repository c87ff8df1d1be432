// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/core/error.hpp"
#include "nerfedit/core/image.hpp"
#include "nerfedit/io/png.hpp"
#include "nerfedit/render/camera.hpp"

namespace nerfedit::io {

struct SceneFrame {
  std::string file_path;  // as written in the manifest
  Eigen::Matrix4d camera_to_world = Eigen::Matrix4d::Identity();
  Image<float> image;  // RGB over white
};

/// Multi-view capture in the synthetic-360 layout: one manifest per split
/// (transforms_<split>.json) with a shared horizontal field of view.
struct SceneDataset {
  double camera_angle_x = 0;
  int width = 0;
  int height = 0;
  std::map<std::string, std::vector<SceneFrame>> splits;

  [[nodiscard]] render::Intrinsics intrinsics() const {
    return render::Intrinsics::from_fov(camera_angle_x, width, height);
  }
  [[nodiscard]] const std::vector<SceneFrame>& split(const std::string& name) const {
    auto it = splits.find(name);
    if (it == splits.end()) throw ValidationError("scene: no '" + name + "' split");
    return it->second;
  }
  [[nodiscard]] render::CameraModel camera(const SceneFrame& f) const { return {intrinsics(), f.camera_to_world}; }
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"train", "val", "test"};
  return names;
}

/// Rotation block orthonormal within `tol` and a homogeneous last row.
inline void validate_pose(const Eigen::Matrix4d& m, const std::string& where, double tol = 1e-4) {
  if (!m.allFinite()) throw ValidationError(where + ": non-finite transform_matrix");
  const Eigen::Matrix3d r = m.block<3, 3>(0, 0);
  const double err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (err > tol) throw ValidationError(where + ": rotation is not orthonormal (error " + std::to_string(err) + ")");
  if (r.determinant() < 0) throw ValidationError(where + ": rotation is a reflection");
  const Eigen::RowVector4d last = m.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol)
    throw ValidationError(where + ": last row of transform_matrix must be (0,0,0,1)");
}

namespace detail {

inline Eigen::Matrix4d matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": transform_matrix must be 4x4");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw ValidationError(where + ": transform_matrix must be 4x4");
    for (int c = 0; c < 4; ++c) {
      if (!j[r][c].is_number()) throw ValidationError(where + ": transform_matrix entries must be numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Eigen::Matrix4d& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

/// Manifest paths usually omit the extension.
inline std::filesystem::path frame_file(const std::filesystem::path& root, const std::string& file_path) {
  std::filesystem::path p = root / file_path;
  if (!p.has_extension()) p += ".png";
  return p.lexically_normal();
}

}  // namespace detail

/// Loads every transforms_<split>.json present under `root` ("train" is required).
inline SceneDataset load_scene(const std::filesystem::path& root, bool load_images = true) {
  SceneDataset ds;
  bool have_fov = false;
  for (const auto& split : split_names()) {
    const auto manifest = root / ("transforms_" + split + ".json");
    if (!std::filesystem::exists(manifest)) {
      if (split == "train") throw ValidationError("scene: missing " + manifest.string());
      continue;
    }
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("scene: malformed " + manifest.string() + ": " + e.what());
    }
    if (!j.contains("camera_angle_x") || !j["camera_angle_x"].is_number())
      throw ValidationError("scene: " + manifest.string() + " lacks camera_angle_x");
    const double fov = j["camera_angle_x"].get<double>();
    if (!(fov > 0 && fov < 3.14159)) throw ValidationError("scene: camera_angle_x out of range");
    if (have_fov && std::abs(fov - ds.camera_angle_x) > 1e-9)
      throw ValidationError("scene: splits disagree on camera_angle_x");
    ds.camera_angle_x = fov;
    have_fov = true;
    if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty())
      throw ValidationError("scene: " + manifest.string() + " has no frames");
    auto& frames = ds.splits[split];
    for (size_t i = 0; i < j["frames"].size(); ++i) {
      const auto& f = j["frames"][i];
      const std::string where = manifest.filename().string() + " frame " + std::to_string(i);
      if (!f.contains("file_path") || !f.contains("transform_matrix"))
        throw ValidationError("scene: " + where + " needs file_path and transform_matrix");
      SceneFrame frame;
      frame.file_path = f["file_path"].get<std::string>();
      frame.camera_to_world = detail::matrix_from_json(f["transform_matrix"], where);
      validate_pose(frame.camera_to_world, where);
      if (load_images) {
        const auto file = detail::frame_file(root, frame.file_path);
        if (!std::filesystem::exists(file)) throw ValidationError("scene: missing frame image " + file.string());
        frame.image = composite_over_white<float>(read_png(file));
        if (ds.width == 0) {
          ds.width = frame.image.width;
          ds.height = frame.image.height;
        } else if (frame.image.width != ds.width || frame.image.height != ds.height) {
          throw ValidationError("scene: " + file.string() + " is " + std::to_string(frame.image.width) + "x" +
                                std::to_string(frame.image.height) + ", expected " + std::to_string(ds.width) + "x" +
                                std::to_string(ds.height));
        }
      }
      frames.push_back(std::move(frame));
    }
  }
  return ds;
}

/// Writes manifests and 8-bit RGB frames; file_path defaults to <split>/r_<i>.
inline void write_scene(const std::filesystem::path& root, SceneDataset& ds) {
  std::filesystem::create_directories(root);
  for (auto& [split, frames] : ds.splits) {
    nlohmann::json j;
    j["camera_angle_x"] = ds.camera_angle_x;
    j["frames"] = nlohmann::json::array();
    for (size_t i = 0; i < frames.size(); ++i) {
      auto& f = frames[i];
      if (f.file_path.empty()) f.file_path = "./" + split + "/r_" + std::to_string(i);
      write_png(detail::frame_file(root, f.file_path), f.image);
      j["frames"].push_back({{"file_path", f.file_path}, {"transform_matrix", detail::matrix_to_json(f.camera_to_world)}});
    }
    std::ofstream out(root / ("transforms_" + split + ".json"));
    if (!out) throw RuntimeFailure("scene: cannot write manifest in " + root.string());
    out << j.dump(2) << "\n";
  }
}

}  // namespace nerfedit::io
