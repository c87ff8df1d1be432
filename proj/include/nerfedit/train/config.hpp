// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/augment/augment.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/fields/radiance_field.hpp"
#include "nerfedit/localize/regions.hpp"
#include "nerfedit/objectives/losses.hpp"
#include "nerfedit/objectives/schedule.hpp"
#include "nerfedit/render/camera.hpp"
#include "nerfedit/render/renderer.hpp"
#include "nerfedit/render/toggles.hpp"
#include "nerfedit/train/adam.hpp"

namespace nerfedit::train {

enum class Profile { Desk, Full };

inline Profile parse_profile(const std::string& s) {
  if (s == "desk") return Profile::Desk;
  if (s == "full") return Profile::Full;
  throw ValidationError("unknown profile '" + s + "' (expected desk or full)");
}
inline std::string profile_name(Profile p) { return p == Profile::Desk ? "desk" : "full"; }

/// 5000 steps for add alone, 4000 when add is combined with other
/// operations, 3000 otherwise.
inline int default_budget(const render::EditOps& ops) {
  if (ops.add) return (ops.remove || ops.change) ? 4000 : 5000;
  return 3000;
}

struct EmbedderConfig {
  std::string type = "mock";  // mock | remote
  std::string url;
  int dim = 512;
};

struct SegmenterConfig {
  std::string type = "color_key";  // color_key | disk | remote
  // Text the mock responds to; defaults to the source text.
  std::string text;
  // color_key: key color; empty means the color named in the text.
  std::vector<double> color;
  double tolerance = 0.25;
  // disk: center and radius in normalized image coordinates.
  double center_x = 0.5, center_y = 0.5, radius = 0.25;
  int resolution = 352;
  std::string url;
};

struct EditConfig {
  Profile profile = Profile::Full;
  render::EditOps ops = render::EditOps::none();
  std::string source_text, target_text;
  int iterations = 0;
  uint64_t seed = 0;
  int patch_size = 72;
  int dilations = localize::kDefaultDilations;
  objectives::LossWeights weights{};
  objectives::OpacityThresholds thresholds{};
  objectives::LearningRateSchedule lr{};
  AdamConfig adam{};
  render::RenderConfig render{};
  render::CameraBounds camera{};
  augment::AugmentConfig augment{};
  std::string templates_file;
  fields::EditableArchitecture editable{};
  EmbedderConfig embedder{};
  std::optional<SegmenterConfig> segmenter;
  std::string user_masks;
  int preview_every = 0;
  int retries = 3;

  void validate() const {
    require(ops.any(), "config: at least one editing operation must be enabled");
    require(!source_text.empty() && !target_text.empty(), "config: source_text and target_text are required");
    require(iterations > 0, "config: iterations must be > 0");
    require(patch_size >= 1, "config: patch_size must be >= 1");
    require(dilations >= 0, "config: dilations must be >= 0");
    require(weights.lambda_global >= 0 && weights.lambda_region >= 0 && weights.lambda_opacity >= 0 &&
                weights.lambda_reg >= 0,
            "config: loss weights must be >= 0");
    thresholds.validate(ops);
    require(lr.initial > 0 && lr.final > 0 && lr.decay_steps >= 0, "config: bad learning-rate schedule");
    adam.validate();
    render.validate();
    camera.validate();
    augment.validate();
    editable.validate();
    require(embedder.type == "mock" || embedder.type == "remote", "config: embedder.type must be mock or remote");
    require(embedder.type != "remote" || !embedder.url.empty(), "config: remote embedder needs a url");
    require(segmenter.has_value() || !user_masks.empty(), "config: need a segmenter or user_masks");
    if (segmenter) {
      const auto& s = *segmenter;
      require(s.type == "color_key" || s.type == "disk" || s.type == "remote",
              "config: segmenter.type must be color_key, disk or remote");
      require(s.type != "remote" || !s.url.empty(), "config: remote segmenter needs a url");
      require(s.color.empty() || s.color.size() == 3, "config: segmenter.color must have 3 entries");
      require(s.resolution >= 1, "config: segmenter.resolution must be >= 1");
    }
    require(preview_every >= 0 && retries >= 0, "config: preview_every and retries must be >= 0");
  }
};

/// Profile defaults. Desk scales patch size, sample counts, budget, the
/// regularizer start, the schedules and the editable network for CPU runs.
inline EditConfig profile_defaults(Profile p, const render::EditOps& ops) {
  EditConfig c;
  c.profile = p;
  c.ops = ops;
  if (p == Profile::Full) {
    c.iterations = default_budget(ops);
    c.editable.position = {10, true};
    c.editable.direction = {4, true};
    c.preview_every = 500;
    return c;
  }
  c.iterations = 300;
  c.patch_size = 32;
  c.weights.reg_start_step = 100;
  c.lr = {5e-3, 1e-3, 100};
  c.thresholds.add.steps = 10;
  c.thresholds.change.steps = 10;
  c.render.coarse_samples = 32;
  c.render.fine_samples = 32;
  c.editable.width = 64;
  c.editable.residual_blocks = 1;
  c.editable.color_width = 32;
  c.editable.position = {6, true};
  c.editable.direction = {2, true};
  c.preview_every = 100;
  return c;
}

namespace detail {

/// Reads a JSON object, remembering which keys were consumed so leftovers
/// can be rejected.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ValidationError("config: " + where_ + " must be an object");
  }

  [[nodiscard]] bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename V>
  void read(const std::string& key, V& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config: " + where_ + key + " has the wrong type");
    }
  }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    return ObjectReader(j_.at(key), where_ + key + ".");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ValidationError("config: unknown key '" + where_ + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void read_schedule(ObjectReader& parent, const std::string& key, objectives::AnnealSchedule& s) {
  if (!parent.has(key)) return;
  auto r = parent.child(key);
  r.read("start", s.start);
  r.read("target", s.target);
  r.read("steps", s.steps);
  r.finish();
}

inline void read_encoding(ObjectReader& r, const std::string& key, fields::EncodingConfig& e) {
  r.read(key, e.num_freqs);
}

}  // namespace detail

/// Builds an EditConfig from JSON: profile defaults first, then every
/// present key. Unknown keys at any level are rejected.
inline EditConfig parse_edit_config(const nlohmann::json& j, std::optional<Profile> profile_override = std::nullopt) {
  detail::ObjectReader root(j, "");
  std::string profile = "full";
  root.read("profile", profile);
  const Profile p = profile_override ? *profile_override : parse_profile(profile);
  std::vector<std::string> op_names;
  root.read("operations", op_names);
  require(!op_names.empty(), "config: 'operations' must list at least one of add, remove, change");
  const auto ops = render::EditOps::parse(op_names);
  EditConfig c = profile_defaults(p, ops);

  root.read("source_text", c.source_text);
  root.read("target_text", c.target_text);
  root.read("iterations", c.iterations);
  root.read("seed", c.seed);
  root.read("patch_size", c.patch_size);
  root.read("dilations", c.dilations);
  root.read("templates_file", c.templates_file);
  root.read("user_masks", c.user_masks);
  root.read("preview_every", c.preview_every);
  root.read("retries", c.retries);

  if (root.has("loss_weights")) {
    auto r = root.child("loss_weights");
    r.read("global", c.weights.lambda_global);
    r.read("region", c.weights.lambda_region);
    r.read("opacity", c.weights.lambda_opacity);
    r.read("reg", c.weights.lambda_reg);
    r.read("reg_start_step", c.weights.reg_start_step);
    r.finish();
  }
  if (root.has("thresholds")) {
    auto r = root.child("thresholds");
    detail::read_schedule(r, "add", c.thresholds.add);
    detail::read_schedule(r, "remove", c.thresholds.remove);
    detail::read_schedule(r, "change", c.thresholds.change);
    r.finish();
  }
  if (root.has("learning_rate")) {
    auto r = root.child("learning_rate");
    r.read("initial", c.lr.initial);
    r.read("final", c.lr.final);
    r.read("decay_steps", c.lr.decay_steps);
    r.finish();
  }
  if (root.has("adam")) {
    auto r = root.child("adam");
    r.read("beta1", c.adam.beta1);
    r.read("beta2", c.adam.beta2);
    r.read("eps", c.adam.eps);
    r.finish();
  }
  if (root.has("render")) {
    auto r = root.child("render");
    r.read("coarse_samples", c.render.coarse_samples);
    r.read("fine_samples", c.render.fine_samples);
    r.read("t_near", c.render.t_near);
    r.read("t_far", c.render.t_far);
    r.read("white_background", c.render.white_background);
    r.read("chunk", c.render.chunk);
    r.finish();
  }
  if (root.has("camera")) {
    auto r = root.child("camera");
    r.read("radius_min", c.camera.radius_min);
    r.read("radius_max", c.camera.radius_max);
    r.read("elevation_min_deg", c.camera.elevation_min_deg);
    r.read("elevation_max_deg", c.camera.elevation_max_deg);
    r.finish();
  }
  if (root.has("augment")) {
    auto r = root.child("augment");
    r.read("size", c.augment.size);
    r.read("perspective_scale", c.augment.perspective_scale);
    r.read("perspective_probability", c.augment.perspective_probability);
    r.read("color_jitter", c.augment.color_jitter);
    r.read("translation", c.augment.translation);
    r.read("cutout", c.augment.cutout);
    r.read("translation_ratio", c.augment.translation_ratio);
    r.read("cutout_ratio", c.augment.cutout_ratio);
    r.read("templates", c.augment.templates);
    r.finish();
  }
  if (root.has("editable")) {
    auto r = root.child("editable");
    r.read("width", c.editable.width);
    r.read("residual_blocks", c.editable.residual_blocks);
    r.read("color_width", c.editable.color_width);
    detail::read_encoding(r, "position_freqs", c.editable.position);
    detail::read_encoding(r, "direction_freqs", c.editable.direction);
    r.read("initial_blend", c.editable.initial_blend);
    r.read("density_head_scale", c.editable.density_head_scale);
    r.finish();
  }
  if (root.has("embedder")) {
    auto r = root.child("embedder");
    r.read("type", c.embedder.type);
    r.read("url", c.embedder.url);
    r.read("dim", c.embedder.dim);
    r.finish();
  }
  if (root.has("segmenter")) {
    auto r = root.child("segmenter");
    SegmenterConfig s;
    r.read("type", s.type);
    r.read("text", s.text);
    r.read("color", s.color);
    r.read("tolerance", s.tolerance);
    r.read("center_x", s.center_x);
    r.read("center_y", s.center_y);
    r.read("radius", s.radius);
    r.read("resolution", s.resolution);
    r.read("url", s.url);
    r.finish();
    c.segmenter = s;
  }
  root.finish();
  if (!c.templates_file.empty()) c.augment.templates = augment::load_templates(c.templates_file);
  c.validate();
  return c;
}

inline EditConfig load_edit_config(const std::filesystem::path& path,
                                   std::optional<Profile> profile_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: malformed " + path.string() + ": " + e.what());
  }
  // Relative file references resolve against the config's directory.
  for (const char* key : {"templates_file", "user_masks"})
    if (j.is_object() && j.contains(key) && j[key].is_string()) {
      const std::filesystem::path f = j[key].get<std::string>();
      if (f.is_relative()) j[key] = (path.parent_path() / f).string();
    }
  return parse_edit_config(j, profile_override);
}

/// Echo of the resolved configuration, written next to the training log.
inline nlohmann::json to_json(const EditConfig& c) {
  auto sched = [](const objectives::AnnealSchedule& s) {
    return nlohmann::json{{"start", s.start}, {"target", s.target}, {"steps", s.steps}};
  };
  nlohmann::json j = {
      {"profile", profile_name(c.profile)},
      {"operations", c.ops.names()},
      {"source_text", c.source_text},
      {"target_text", c.target_text},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"patch_size", c.patch_size},
      {"dilations", c.dilations},
      {"loss_weights",
       {{"global", c.weights.lambda_global},
        {"region", c.weights.lambda_region},
        {"opacity", c.weights.lambda_opacity},
        {"reg", c.weights.lambda_reg},
        {"reg_start_step", c.weights.reg_start_step}}},
      {"learning_rate", {{"initial", c.lr.initial}, {"final", c.lr.final}, {"decay_steps", c.lr.decay_steps}}},
      {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"render",
       {{"coarse_samples", c.render.coarse_samples},
        {"fine_samples", c.render.fine_samples},
        {"t_near", c.render.t_near},
        {"t_far", c.render.t_far},
        {"white_background", c.render.white_background},
        {"chunk", c.render.chunk}}},
      {"camera",
       {{"radius_min", c.camera.radius_min},
        {"radius_max", c.camera.radius_max},
        {"elevation_min_deg", c.camera.elevation_min_deg},
        {"elevation_max_deg", c.camera.elevation_max_deg}}},
      {"augment",
       {{"size", c.augment.size},
        {"perspective_scale", c.augment.perspective_scale},
        {"perspective_probability", c.augment.perspective_probability},
        {"color_jitter", c.augment.color_jitter},
        {"translation", c.augment.translation},
        {"cutout", c.augment.cutout},
        {"translation_ratio", c.augment.translation_ratio},
        {"cutout_ratio", c.augment.cutout_ratio},
        {"templates", c.augment.templates}}},
      {"editable",
       {{"width", c.editable.width},
        {"residual_blocks", c.editable.residual_blocks},
        {"color_width", c.editable.color_width},
        {"position_freqs", c.editable.position.num_freqs},
        {"direction_freqs", c.editable.direction.num_freqs},
        {"initial_blend", c.editable.initial_blend},
        {"density_head_scale", c.editable.density_head_scale}}},
      {"embedder", {{"type", c.embedder.type}, {"url", c.embedder.url}, {"dim", c.embedder.dim}}},
      {"preview_every", c.preview_every},
      {"retries", c.retries}};
  nlohmann::json th;
  if (c.ops.add) th["add"] = sched(c.thresholds.add);
  if (c.ops.remove) th["remove"] = sched(c.thresholds.remove);
  if (c.ops.change) th["change"] = sched(c.thresholds.change);
  j["thresholds"] = th;
  if (c.segmenter) {
    const auto& s = *c.segmenter;
    j["segmenter"] = {{"type", s.type},         {"text", s.text},         {"color", s.color},
                      {"tolerance", s.tolerance}, {"center_x", s.center_x}, {"center_y", s.center_y},
                      {"radius", s.radius},     {"resolution", s.resolution}, {"url", s.url}};
  }
  if (!c.user_masks.empty()) j["user_masks"] = c.user_masks;
  return j;
}

}  // namespace nerfedit::train
