// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: make-scene, pretrain, edit, render, evaluate,
// segment-preview. Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nerfedit/nerfedit.hpp"

namespace fs = std::filesystem;
using namespace nerfedit;

namespace {

struct CommonFlags {
  std::string config, scene, checkpoint, out;
  std::optional<uint64_t> seed;
  std::string profile;
  std::string provider;
};

std::optional<train::Profile> profile_flag(const CommonFlags& f) {
  if (f.profile.empty()) return std::nullopt;
  return train::parse_profile(f.profile);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// --provider overrides the provider types named in the config.
void apply_provider_flag(train::EditConfig& c, const std::string& provider) {
  if (provider.empty()) return;
  if (provider == "mock") {
    c.embedder.type = "mock";
    if (c.segmenter && c.segmenter->type == "remote") c.segmenter->type = "color_key";
  } else if (provider == "remote") {
    c.embedder.type = "remote";
    if (c.segmenter) c.segmenter->type = "remote";
  } else {
    throw ValidationError("--provider must be mock or remote");
  }
  c.validate();
}

train::EditConfig load_config(const CommonFlags& f) {
  if (f.config.empty()) throw ValidationError("--config is required");
  auto c = train::load_edit_config(f.config, profile_flag(f));
  if (f.seed) c.seed = *f.seed;
  apply_provider_flag(c, f.provider);
  return c;
}

render::RenderConfig render_config(const CommonFlags& f) {
  if (!f.config.empty()) return load_config(f).render;
  const auto p = profile_flag(f).value_or(train::Profile::Full);
  return train::profile_defaults(p, render::EditOps{}).render;
}

fields::PretrainedModel<float> require_pretrained(const CommonFlags& f) {
  if (f.checkpoint.empty()) throw ValidationError("--checkpoint (pretrained model) is required");
  if (!fs::exists(f.checkpoint)) throw ValidationError("checkpoint not found: " + f.checkpoint);
  return fields::load_pretrained<float>(f.checkpoint);
}

io::SceneDataset require_scene(const CommonFlags& f) {
  if (f.scene.empty()) throw ValidationError("--scene is required");
  return io::load_scene(f.scene);
}

void require_out(const CommonFlags& f) {
  if (f.out.empty()) throw ValidationError("--out is required");
}

std::string view_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03zu", i);
  return buf;
}

std::vector<io::SceneFrame> pick_frames(const io::SceneDataset& ds, const std::string& split, int views) {
  auto frames = ds.split(split);
  if (views > 0 && static_cast<size_t>(views) < frames.size()) frames.resize(views);
  return frames;
}

// ---------------------------------------------------------------------------

int cmd_make_scene(const CommonFlags& f, int size, int train_views, int test_views) {
  require_out(f);
  train::DeskSceneOptions opt;
  opt.size = size;
  opt.train_views = train_views;
  opt.test_views = test_views;
  if (f.seed) opt.seed = *f.seed;
  auto ds = train::make_desk_dataset(train::two_sphere_scene(), opt);
  io::write_scene(f.out, ds);
  log::info("wrote two-sphere scene ({} train views, {}x{}) to {}", train_views, size, size, f.out);
  return 0;
}

train::PretrainConfig pretrain_config(const CommonFlags& f) {
  const auto p = profile_flag(f).value_or(train::Profile::Full);
  auto c = p == train::Profile::Desk ? train::PretrainConfig::desk() : train::PretrainConfig::full();
  if (!f.config.empty()) {
    const auto j = read_json(f.config);
    if (!j.is_object()) throw ValidationError("pretrain config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "steps") c.steps = v.get<int>();
        else if (k == "batch_rays") c.batch_rays = v.get<int>();
        else if (k == "coarse_samples") c.coarse_samples = v.get<int>();
        else if (k == "fine_samples") c.fine_samples = v.get<int>();
        else if (k == "separate_fine") c.separate_fine = v.get<bool>();
        else if (k == "lr_initial") c.lr_initial = v.get<double>();
        else if (k == "lr_final") c.lr_final = v.get<double>();
        else if (k == "seed") c.seed = v.get<uint64_t>();
        else if (k == "log_every") c.log_every = v.get<int>();
        else throw ValidationError("pretrain config: unknown key '" + k + "'");
      } catch (const nlohmann::json::exception&) {
        throw ValidationError("pretrain config: " + k + " has the wrong type");
      }
    }
  }
  if (f.seed) c.seed = *f.seed;
  c.validate();
  return c;
}

int cmd_pretrain(const CommonFlags& f) {
  auto ds = require_scene(f);
  const auto cfg = pretrain_config(f);
  fields::PretrainedModel<float> model = [&] {
    if (!f.checkpoint.empty() && fs::exists(f.checkpoint)) {
      log::info("loading {}; skipping training", f.checkpoint);
      return fields::load_pretrained<float>(f.checkpoint);
    }
    return train::pretrain_scene<float>(ds, cfg);
  }();
  const std::string split = ds.splits.count("test") ? "test" : (ds.splits.count("val") ? "val" : "train");
  const double p = train::held_out_psnr(model, ds, split, cfg.eval_render);
  log::info("{} PSNR {:.2f} dB", split, p);
  fs::path target = f.out.empty() ? fs::path(f.checkpoint) : fs::path(f.out);
  if (target.empty()) throw ValidationError("--out is required");
  if (target != fs::path(f.checkpoint)) fields::save_pretrained(target, model);
  write_json(target.parent_path() / (target.stem().string() + "_report.json"),
             {{"psnr", p}, {"split", split}, {"hash", std::to_string(model.hash())}});
  std::cout << "psnr " << p << "\n";
  return 0;
}

int cmd_edit(const CommonFlags& f, const std::string& resume, int stop_at) {
  require_out(f);
  auto cfg = load_config(f);
  const auto ds = require_scene(f);
  const auto model = require_pretrained(f);
  auto embedder = train::make_embedder(cfg.embedder);
  std::unique_ptr<localize::SegmentationProvider> segmenter;
  if (cfg.segmenter) segmenter = train::make_segmenter(*cfg.segmenter, cfg.source_text);
  std::optional<localize::UserMaskSet> user;
  if (!cfg.user_masks.empty()) user = localize::load_user_masks(cfg.user_masks);
  train::EditRunOptions opt;
  opt.out_dir = f.out;
  if (!resume.empty()) opt.resume = resume;
  if (stop_at > 0) opt.stop_at = stop_at;
  const auto res = train::run_edit(cfg, model, ds.intrinsics(), *embedder, segmenter.get(), user ? &*user : nullptr, opt);
  log::info("edit finished after {} steps; checkpoint {}", res.steps, res.checkpoint.string());
  return 0;
}

int cmd_render(const CommonFlags& f, const std::string& editable_path, const std::string& split, int views) {
  require_out(f);
  const auto ds = require_scene(f);
  const auto model = require_pretrained(f);
  std::optional<fields::EditableField<float>> editable;
  render::EditOps ops = render::EditOps::none();
  if (!editable_path.empty()) {
    editable.emplace(fields::load_editable<float>(editable_path));
    ops = train::ops_from_metadata(fields::read_checkpoint_metadata(editable_path));
  }
  const auto rc = render_config(f);
  render::SceneFields<float> scene{&model, editable ? &*editable : nullptr, ops};
  const auto frames = pick_frames(ds, split, views);
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto img = render::render_full_image<float>(ds.camera(frames[i]), scene, rc);
    const fs::path base = fs::path(f.out) / view_name(i);
    io::write_png(base.string() + "_original.png", img.original);
    io::write_png(base.string() + "_editable.png", img.editable);
    io::write_png(base.string() + "_blended.png", img.blended);
    io::write_png(base.string() + "_add.png", img.add);
    io::write_png(base.string() + "_remove.png", img.remove);
    io::write_png(base.string() + "_change.png", img.change);
  }
  log::info("rendered {} poses to {}", frames.size(), f.out);
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& renders, std::string source, std::string target) {
  require_out(f);
  if (renders.empty()) throw ValidationError("--renders is required");
  std::unique_ptr<objectives::EmbeddingProvider> provider;
  if (!f.config.empty()) {
    const auto cfg = load_config(f);
    if (source.empty()) source = cfg.source_text;
    if (target.empty()) target = cfg.target_text;
    provider = train::make_embedder(cfg.embedder);
  } else {
    if (f.provider == "remote") throw ValidationError("--provider remote needs --config with an embedder url");
    provider = std::make_unique<objectives::ColorStatsEmbedder>();
  }
  if (source.empty() || target.empty()) throw ValidationError("source and target texts are required");
  std::vector<Image<float>> original, edited;
  for (size_t i = 0;; ++i) {
    const fs::path base = fs::path(renders) / view_name(i);
    const fs::path o = base.string() + "_original.png", e = base.string() + "_blended.png";
    if (!fs::exists(o) || !fs::exists(e)) break;
    original.push_back(io::composite_over_white<float>(io::read_png(o)));
    edited.push_back(io::composite_over_white<float>(io::read_png(e)));
  }
  if (original.empty()) throw ValidationError("no view_NNN_original.png / _blended.png pairs in " + renders);
  auto report = io::evaluate(original, edited, source, target, *provider);
  auto j = report.to_json();
  j["source_text"] = source;
  j["target_text"] = target;
  write_json(f.out, j);
  std::cout << "D_L1 " << report.d_l1 << " S_CLIP " << report.s_clip << " MP " << report.mp << "\n";
  return 0;
}

int cmd_segment_preview(const CommonFlags& f, const std::string& split, int views) {
  require_out(f);
  const auto cfg = load_config(f);
  if (!cfg.segmenter) throw ValidationError("segment-preview needs a segmenter in the config");
  const auto ds = require_scene(f);
  const auto model = require_pretrained(f);
  auto segmenter = train::make_segmenter(*cfg.segmenter, cfg.source_text);
  render::SceneFields<float> scene{&model, nullptr, render::EditOps::none()};
  const auto frames = pick_frames(ds, split, views);
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto img = render::render_full_image<float>(ds.camera(frames[i]), scene, cfg.render);
    const auto masks = localize::localize(img.original, cfg.source_text, *segmenter, cfg.dilations, cfg.ops.add);
    const fs::path base = fs::path(f.out) / view_name(i);
    io::write_png(base.string() + "_original.png", img.original);
    auto as_png = [](const localize::Mask& m) {
      Image<uint8_t> out = m;
      for (auto& v : out.data) v = v ? 255 : 0;
      return out;
    };
    io::write_png(base.string() + "_target.png", as_png(masks.target));
    io::write_png(base.string() + "_positive.png", as_png(masks.positive));
    io::write_png(base.string() + "_negative.png", as_png(masks.negative));
    // Overlay: M in red, M+ minus M in yellow, M- in blue, at half opacity.
    Image<float> overlay = img.original;
    for (int y = 0; y < overlay.height; ++y)
      for (int x = 0; x < overlay.width; ++x) {
        float tint[3];
        if (masks.target.at(x, y)) tint[0] = 1, tint[1] = 0, tint[2] = 0;
        else if (masks.positive.at(x, y)) tint[0] = 1, tint[1] = 1, tint[2] = 0;
        else if (masks.negative.at(x, y)) tint[0] = 0, tint[1] = 0, tint[2] = 1;
        else continue;
        for (int c = 0; c < 3; ++c) overlay.at(x, y, c) = 0.5f * overlay.at(x, y, c) + 0.5f * tint[c];
      }
    io::write_png(base.string() + "_overlay.png", overlay);
  }
  log::info("wrote mask previews for {} poses to {}", frames.size(), f.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-driven localized editing of radiance fields"};
  app.require_subcommand(1);
  app.fallthrough();
  CommonFlags f;
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->check(
      CLI::IsMember({"trace", "debug", "info", "warn", "error"}));

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Edit configuration (JSON)");
    sub->add_option("--scene", f.scene, "Scene directory with transforms_<split>.json");
    sub->add_option("--checkpoint", f.checkpoint, "Pretrained checkpoint manifest");
    sub->add_option("--out", f.out, "Output path");
    sub->add_option("--seed", f.seed, "Random seed override");
    sub->add_option("--profile", f.profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    sub->add_option("--provider", f.provider, "mock or remote")->check(CLI::IsMember({"mock", "remote"}));
  };

  int size = 64, train_views = 20, test_views = 5;
  auto* make_scene = app.add_subcommand("make-scene", "Write the procedural two-sphere scene");
  add_common(make_scene);
  make_scene->add_option("--size", size, "Image width and height")->check(CLI::PositiveNumber);
  make_scene->add_option("--train-views", train_views)->check(CLI::PositiveNumber);
  make_scene->add_option("--test-views", test_views)->check(CLI::NonNegativeNumber);

  auto* pretrain = app.add_subcommand("pretrain", "Fit the frozen field to a scene");
  add_common(pretrain);

  std::string resume;
  int stop_at = 0;
  auto* edit = app.add_subcommand("edit", "Train the editable field");
  add_common(edit);
  edit->add_option("--resume", resume, "Training state directory to resume from");
  edit->add_option("--stop-at", stop_at, "Stop after this many total steps")->check(CLI::PositiveNumber);

  std::string editable, split = "test";
  int views = 0;
  auto* render = app.add_subcommand("render", "Render colors and opacity maps for scene poses");
  add_common(render);
  render->add_option("--editable", editable, "Edited checkpoint manifest");
  render->add_option("--split", split, "Scene split to take poses from");
  render->add_option("--views", views, "Limit the number of poses")->check(CLI::NonNegativeNumber);

  std::string renders, source, target;
  auto* evaluate = app.add_subcommand("evaluate", "Compute D_L1, S_CLIP and MP for rendered views");
  add_common(evaluate);
  evaluate->add_option("--renders", renders, "Directory written by render");
  evaluate->add_option("--source-text", source);
  evaluate->add_option("--target-text", target);

  auto* preview = app.add_subcommand("segment-preview", "Render the original view with M, M+ and M- overlays");
  add_common(preview);
  preview->add_option("--split", split, "Scene split to take poses from");
  preview->add_option("--views", views, "Limit the number of poses")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*make_scene) return cmd_make_scene(f, size, train_views, test_views);
    if (*pretrain) return cmd_pretrain(f);
    if (*edit) return cmd_edit(f, resume, stop_at);
    if (*render) return cmd_render(f, editable, split, views);
    if (*evaluate) return cmd_evaluate(f, renders, source, target);
    if (*preview) return cmd_segment_preview(f, split, views);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
