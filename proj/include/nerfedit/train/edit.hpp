// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nerfedit/augment/augment.hpp"
#include "nerfedit/core/error.hpp"
#include "nerfedit/core/log.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/checkpoint.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/io/png.hpp"
#include "nerfedit/localize/providers.hpp"
#include "nerfedit/localize/regions.hpp"
#include "nerfedit/localize/remote.hpp"
#include "nerfedit/objectives/embedding.hpp"
#include "nerfedit/objectives/losses.hpp"
#include "nerfedit/objectives/remote.hpp"
#include "nerfedit/render/renderer.hpp"
#include "nerfedit/train/adam.hpp"
#include "nerfedit/train/config.hpp"

namespace nerfedit::train {

inline std::unique_ptr<objectives::EmbeddingProvider> make_embedder(const EmbedderConfig& c) {
  if (c.type == "mock") return std::make_unique<objectives::ColorStatsEmbedder>();
  if (c.type == "remote") return std::make_unique<objectives::RemoteEmbedder>(c.url, c.dim);
  throw ValidationError("unknown embedder type '" + c.type + "'");
}

/// `source_text` fills in the mock's text and, for color_key without an
/// explicit color, the key color named in it.
inline std::unique_ptr<localize::SegmentationProvider> make_segmenter(const SegmenterConfig& c,
                                                                      const std::string& source_text) {
  const std::string text = c.text.empty() ? source_text : c.text;
  if (c.type == "remote") return std::make_unique<localize::RemoteSegmenter>(c.url, c.resolution);
  if (c.type == "disk")
    return std::make_unique<localize::DiskSegmenter>(text, c.center_x, c.center_y, c.radius, c.resolution);
  if (c.type == "color_key") {
    Vec3<double> key;
    if (c.color.size() == 3) {
      key = Vec3<double>(c.color[0], c.color[1], c.color[2]);
    } else {
      const auto named = objectives::ColorStatsEmbedder().named_color(text);
      if (!named) throw ValidationError("segmenter: no key color given and '" + text + "' names no color");
      key = *named;
    }
    require(key.minCoeff() >= 0 && key.sum() > 0, "segmenter: key color must be nonnegative and nonzero");
    return std::make_unique<localize::ColorKeySegmenter>(text, key, c.tolerance, c.resolution);
  }
  throw ValidationError("unknown segmenter type '" + c.type + "'");
}

/// Calls `fn`, retrying up to `retries` more times on RuntimeFailure.
template <typename F>
auto with_retries(int retries, const std::string& what, F&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const RuntimeFailure& e) {
      if (attempt >= retries)
        throw RuntimeFailure(what + " failed after " + std::to_string(attempt + 1) + " attempts: " + e.what());
      log::warn("{} failed (attempt {}): {}; retrying", what, attempt + 1, e.what());
    }
  }
}

/// One line of the training log.
struct StepRecord {
  int step = 0;
  double lr = 0;
  objectives::OpacityValues tau;
  objectives::OpacityValues means;
  double lambda_plus = 1;
  std::string mask_source;
  objectives::LossTerms terms;
  double directional = 0, global_blended = 0, global_editable = 0;
  bool reg_active = false;
  double total = 0;
  double wall_time = 0;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"step", step},
            {"lr", lr},
            {"tau", {{"add", tau.add}, {"remove", tau.remove}, {"change", tau.change}}},
            {"mean_opacity", {{"add", means.add}, {"remove", means.remove}, {"change", means.change}}},
            {"lambda_plus", lambda_plus},
            {"mask_source", mask_source},
            {"loss",
             {{"clip", terms.clip},
              {"directional", directional},
              {"global_blended", global_blended},
              {"global_editable", global_editable},
              {"region", terms.region},
              {"opacity", terms.opacity},
              {"reg", terms.reg},
              {"reg_active", reg_active},
              {"total", total}}},
            {"wall_time", wall_time}};
  }
};

/// Fixed three-quarter view used for preview renders.
inline render::CameraModel preview_camera(const render::Intrinsics& k, const render::CameraBounds& b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double elevation = std::clamp(30.0, b.elevation_min_deg, b.elevation_max_deg) * deg;
  const double radius = 0.5 * (b.radius_min + b.radius_max);
  return {k, render::look_at(render::spherical_position(radius, 45.0 * deg, elevation))};
}

/// The editing loop over one editable field. The pretrained model is only
/// read; its hash is checked after every step.
class EditSession {
 public:
  using Scalar = float;

  EditSession(EditConfig cfg, const fields::PretrainedModel<Scalar>& pretrained, const render::Intrinsics& intrinsics,
              objectives::EmbeddingProvider& embedder, localize::SegmentationProvider* segmenter,
              const localize::UserMaskSet* user_masks = nullptr)
      : cfg_(std::move(cfg)),
        pretrained_(&pretrained),
        intrinsics_(intrinsics),
        embedder_(&embedder),
        segmenter_(segmenter),
        user_(user_masks),
        editable_(cfg_.editable, cfg_.seed),
        adam_(cfg_.adam, editable_.params().size()),
        grads_(editable_.params().zeros_like()),
        rng_(cfg_.seed),
        pretrained_hash_(pretrained.hash()),
        start_(std::chrono::steady_clock::now()) {
    cfg_.validate();
    intrinsics_.validate();
    require(segmenter_ != nullptr || user_ != nullptr, "edit: need a segmentation provider or user masks");
    require(segmenter_ != nullptr || user_->kind == localize::UserMaskKind::RegionSpecification,
            "edit: noise-removal user masks need a segmentation provider for the other steps");
    require(cfg_.patch_size <= intrinsics_.width && cfg_.patch_size <= intrinsics_.height,
            "edit: patch_size exceeds the image size");
  }

  [[nodiscard]] int step_index() const { return step_; }
  [[nodiscard]] const EditConfig& config() const { return cfg_; }
  [[nodiscard]] const fields::EditableField<Scalar>& editable() const { return editable_; }
  [[nodiscard]] uint64_t pretrained_hash() const { return pretrained_hash_; }
  [[nodiscard]] render::SceneFields<Scalar> scene() const { return {pretrained_, &editable_, cfg_.ops}; }

  StepRecord step() {
    const int s = step_;
    StepRecord rec;
    rec.step = s;
    rec.lr = cfg_.lr.at(s);
    rec.tau = cfg_.thresholds.at(s);
    rec.reg_active = objectives::reg_active(cfg_.weights, s);

    const auto cam = render::sample_camera_pose(rng_, cfg_.camera, intrinsics_);
    const auto patch = render::sample_patch_rays<Scalar>(cam, cfg_.patch_size, rng_, static_cast<Scalar>(cfg_.render.t_near),
                                                         static_cast<Scalar>(cfg_.render.t_far));
    const auto sc = scene();
    render::PatchSamples<Scalar> samples;
    const auto out = render::render_patch<Scalar>(patch, sc, cfg_.render, &rng_, &samples);

    const auto masks = region_masks(s, patch, out.original);
    rec.lambda_plus = masks.lambda_plus;
    rec.mask_source = localize::mask_source(s, user_) == localize::MaskSource::User ? "user" : "segmentation";

    // Vision-language objective on identically augmented batches.
    const auto plan = augment::sample_plan(cfg_.augment, patch.cols, patch.rows, rng_);
    const auto texts = augment::augment_texts(cfg_.source_text, cfg_.target_text, cfg_.augment.templates,
                                              static_cast<int>(plan.size()), rng_);
    const auto original = out.original.template cast<double>();
    const auto editable = out.editable.template cast<double>();
    const auto blended = out.blended.template cast<double>();
    const auto aug_o = plan.apply(original), aug_e = plan.apply(editable), aug_b = plan.apply(blended);
    std::vector<objectives::ClipSample> batch;
    for (size_t i = 0; i < plan.size(); ++i)
      batch.push_back({aug_o[i], aug_e[i], aug_b[i], texts[i].source, texts[i].target});
    const auto clip = with_retries(cfg_.retries, "embedding provider", [&] {
      return objectives::clip_objective(batch, cfg_.weights.lambda_global, *embedder_, true);
    });
    rec.terms.clip = clip.value;
    rec.directional = clip.directional;
    rec.global_blended = clip.global_blended;
    rec.global_editable = clip.global_editable;

    const auto add = out.add.template cast<double>();
    const auto remove = out.remove.template cast<double>();
    const auto change = out.change.template cast<double>();
    Image<double> g_region, g_reg;
    rec.terms.region = objectives::region_loss(add, remove, change, masks, &g_region);
    rec.means = {objectives::mean_of(add), objectives::mean_of(remove), objectives::mean_of(change)};
    objectives::OpacityValues d_means;
    rec.terms.opacity = objectives::opacity_loss(rec.means, rec.tau, cfg_.ops, &d_means);
    rec.terms.reg = objectives::reg_loss(add, &g_reg);
    rec.total = objectives::total_loss(rec.terms, cfg_.weights, s);

    for (auto [name, v] : {std::pair{"clip", rec.terms.clip}, {"region", rec.terms.region},
                           {"opacity", rec.terms.opacity}, {"reg", rec.terms.reg}, {"total", rec.total}})
      if (!std::isfinite(v))
        throw RuntimeFailure("edit: non-finite " + std::string(name) + " loss at step " + std::to_string(s));

    // Cotangents on the rendered patch.
    const auto& w = cfg_.weights;
    const double inv_n = 1.0 / static_cast<double>(patch.size());
    render::PatchCotangent<Scalar> cot(patch.cols, patch.rows);
    const auto gb = plan.vjp(blended, clip.grad_blended);
    const auto ge = plan.vjp(editable, clip.grad_editable);
    for (size_t i = 0; i < gb.data.size(); ++i) {
      cot.blended.data[i] = static_cast<Scalar>(gb.data[i]);
      cot.editable.data[i] = static_cast<Scalar>(ge.data[i]);
    }
    for (size_t i = 0; i < add.data.size(); ++i) {
      const double region = w.lambda_region * g_region.data[i];
      double a = region + w.lambda_opacity * d_means.add * inv_n;
      if (rec.reg_active) a += w.lambda_reg * g_reg.data[i];
      cot.add.data[i] = static_cast<Scalar>(a);
      cot.remove.data[i] = static_cast<Scalar>(region + w.lambda_opacity * d_means.remove * inv_n);
      cot.change.data[i] = static_cast<Scalar>(region + w.lambda_opacity * d_means.change * inv_n);
    }

    grads_.set_zero();
    render::backward_patch<Scalar>(patch, samples, sc, cfg_.render, cot, render::GradientRouting::StopGradient, grads_);
    if (!grads_.all_finite()) throw RuntimeFailure("edit: non-finite gradient at step " + std::to_string(s));
    adam_.step(editable_.mutable_params(), grads_, rec.lr);
    if (!editable_.params().all_finite())
      throw RuntimeFailure("edit: editable parameters became non-finite at step " + std::to_string(s));
    if (pretrained_->hash() != pretrained_hash_)
      throw RuntimeFailure("edit: pretrained parameters changed during editing");

    ++step_;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return rec;
  }

  /// Writes state.json and state.bin (parameters, Adam moments) into `dir`.
  void save_state(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "state.bin", std::ios::binary);
    if (!bin) throw RuntimeFailure("edit: cannot write state in " + dir.string());
    auto dump = [&](std::span<const Scalar> v) {
      bin.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(Scalar)));
    };
    dump(editable_.params().flat());
    dump(adam_.first_moment());
    dump(adam_.second_moment());
    nlohmann::json j = {{"step", step_},
                        {"adam_steps", adam_.steps()},
                        {"rng", serialize_rng(rng_)},
                        {"parameter_count", editable_.params().size()},
                        {"scalar_bytes", sizeof(Scalar)},
                        {"architecture", fields::to_json(editable_.architecture())},
                        {"pretrained_hash", std::to_string(pretrained_hash_)},
                        {"lr", cfg_.lr.at(step_)},
                        {"tau",
                         {{"add", cfg_.thresholds.at(step_).add},
                          {"remove", cfg_.thresholds.at(step_).remove},
                          {"change", cfg_.thresholds.at(step_).change}}}};
    std::ofstream(dir / "state.json") << j.dump(2) << "\n";
  }

  void load_state(const std::filesystem::path& dir) {
    std::ifstream js(dir / "state.json");
    if (!js) throw ValidationError("edit: no training state in " + dir.string());
    const auto j = nlohmann::json::parse(js);
    const size_t n = editable_.params().size();
    require(j.at("parameter_count").get<size_t>() == n && j.at("scalar_bytes").get<size_t>() == sizeof(Scalar),
            "edit: training state does not match the editable architecture");
    require(fields::editable_arch_from_json(j.at("architecture")) == editable_.architecture(),
            "edit: training state was written for a different editable architecture");
    require(j.at("pretrained_hash").get<std::string>() == std::to_string(pretrained_hash_),
            "edit: training state belongs to a different pretrained model");
    std::ifstream bin(dir / "state.bin", std::ios::binary);
    if (!bin) throw ValidationError("edit: missing state.bin in " + dir.string());
    auto load = [&](std::vector<Scalar>& v) {
      v.resize(n);
      bin.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
      if (!bin) throw ValidationError("edit: truncated state.bin");
    };
    std::vector<Scalar> params, m, v;
    load(params);
    load(m);
    load(v);
    std::copy(params.begin(), params.end(), editable_.mutable_params().flat().begin());
    adam_.restore(j.at("adam_steps").get<int64_t>(), std::move(m), std::move(v));
    rng_ = deserialize_rng(j.at("rng").get<std::string>());
    step_ = j.at("step").get<int>();
  }

 private:
  localize::RegionMasks region_masks(int s, const render::RayPatch<Scalar>& patch, const Image<Scalar>& original) {
    const bool add = cfg_.ops.add;
    return localize::resolve_masks(
        s, user_,
        [&] {
          return with_retries(cfg_.retries, "segmentation provider", [&] {
            return localize::localize(original.template cast<float>(), cfg_.source_text, *segmenter_, cfg_.dilations,
                                      add);
          });
        },
        [&](const localize::UserMaskSet& set) {
          const int work = segmenter_ ? segmenter_->resolution() : 352;
          return localize::regions_from_user_target(localize::user_target_for_patch(set, patch), work, cfg_.dilations,
                                                    add);
        });
  }

  EditConfig cfg_;
  const fields::PretrainedModel<Scalar>* pretrained_;
  render::Intrinsics intrinsics_;
  objectives::EmbeddingProvider* embedder_;
  localize::SegmentationProvider* segmenter_;
  const localize::UserMaskSet* user_;
  fields::EditableField<Scalar> editable_;
  Adam<Scalar> adam_;
  fields::ParameterSet<Scalar> grads_;
  Rng rng_;
  uint64_t pretrained_hash_;
  int step_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// Metadata stored with the edited checkpoint; render reads the operations back.
inline nlohmann::json edit_metadata(const EditSession& s) {
  const auto& c = s.config();
  return {{"operations", c.ops.names()},
          {"source_text", c.source_text},
          {"target_text", c.target_text},
          {"steps", s.step_index()},
          {"profile", profile_name(c.profile)},
          {"pretrained_hash", std::to_string(s.pretrained_hash())}};
}

inline render::EditOps ops_from_metadata(const nlohmann::json& meta) {
  if (!meta.contains("operations")) {
    log::warn("editable checkpoint records no operations; enabling all three");
    return {};
  }
  return render::EditOps::parse(meta.at("operations").get<std::vector<std::string>>());
}

struct EditRunOptions {
  std::filesystem::path out_dir;
  // Resume from a state directory written by an earlier run.
  std::optional<std::filesystem::path> resume;
  // Stop after this many steps in total (defaults to the config budget).
  std::optional<int> stop_at;
  std::function<void(const StepRecord&)> on_step;
};

struct EditRunResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::filesystem::path state;
  int steps = 0;
};

/// Runs the editing loop and writes editable.json/.bin, train_log.ndjson,
/// state/ and preview PNGs under out_dir.
inline EditRunResult run_edit(const EditConfig& cfg, const fields::PretrainedModel<float>& pretrained,
                              const render::Intrinsics& intrinsics, objectives::EmbeddingProvider& embedder,
                              localize::SegmentationProvider* segmenter, const localize::UserMaskSet* user,
                              const EditRunOptions& opt) {
  EditSession session(cfg, pretrained, intrinsics, embedder, segmenter, user);
  if (opt.resume) session.load_state(*opt.resume);
  const auto& out = opt.out_dir;
  std::filesystem::create_directories(out);
  std::ofstream(out / "config.resolved.json") << to_json(cfg).dump(2) << "\n";
  EditRunResult res{out / "editable.json", out / "train_log.ndjson", out / "state", 0};
  std::ofstream log_file(res.log, opt.resume ? std::ios::app : std::ios::trunc);
  if (!log_file) throw RuntimeFailure("edit: cannot write " + res.log.string());
  const int stop = opt.stop_at.value_or(cfg.iterations);
  require(stop <= cfg.iterations, "edit: stop_at exceeds the iteration budget");
  const auto preview_cam = preview_camera(intrinsics, cfg.camera);
  while (session.step_index() < stop) {
    const auto rec = session.step();
    log_file << rec.to_json().dump() << "\n" << std::flush;
    if (opt.on_step) opt.on_step(rec);
    const int done = session.step_index();
    if (cfg.preview_every > 0 && (done % cfg.preview_every == 0 || done == cfg.iterations)) {
      const auto img = render::render_full_image<float>(preview_cam, session.scene(), cfg.render);
      char name[32];
      std::snprintf(name, sizeof(name), "step_%06d", done);
      io::write_png(out / "previews" / (std::string(name) + "_blended.png"), img.blended);
      io::write_png(out / "previews" / (std::string(name) + "_editable.png"), img.editable);
      log::info("edit step {} total {:.5f} (clip {:.4f}, region {:.4f}, opacity {:.4f}, reg {:.4f})", done - 1,
                rec.total, rec.terms.clip, rec.terms.region, rec.terms.opacity, rec.terms.reg);
    }
  }
  fields::save_editable(res.checkpoint, session.editable(), edit_metadata(session));
  session.save_state(res.state);
  res.steps = session.step_index();
  return res;
}

}  // namespace nerfedit::train
