// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "nerfedit/train/adam.hpp"
#include "nerfedit/train/edit.hpp"
#include "test_support.hpp"

namespace nerfedit::train {
namespace {

const render::Intrinsics kView = render::Intrinsics::from_fov(0.6911, 16, 16);

fields::PretrainedModel<float> small_model() {
  fields::PretrainedArchitecture a;
  a.depth = 2;
  a.width = 16;
  a.skip_layer = 1;
  a.color_width = 8;
  a.position = {2, true};
  a.direction = {1, true};
  fields::PretrainedModel<float> m{fields::PretrainedField<float>(a, 3), std::nullopt};
  m.coarse.mutable_params().matrix(m.coarse.params().find("density.bias")).setConstant(1.5f);
  return m;
}

EditConfig small_config(uint64_t seed = 4) {
  nlohmann::json j = {{"profile", "desk"},
                      {"operations", {"add", "remove", "change"}},
                      {"source_text", "a red ball"},
                      {"target_text", "a green ball"},
                      {"seed", seed},
                      {"patch_size", 8},
                      {"dilations", 1},
                      {"thresholds", {{"add", {{"target", 0.3}}}, {"change", {{"target", 0.2}}}}},
                      {"loss_weights", {{"reg_start_step", 3}}},
                      {"render", {{"coarse_samples", 8}, {"fine_samples", 8}}},
                      {"augment", {{"size", 2}}},
                      {"editable", {{"width", 16}, {"color_width", 8}, {"position_freqs", 2}, {"direction_freqs", 1}}},
                      {"segmenter", {{"type", "disk"}, {"center_x", 0.5}, {"center_y", 0.5}, {"radius", 0.3}}},
                      {"preview_every", 0}};
  return parse_edit_config(j);
}

struct Harness {
  fields::PretrainedModel<float> model = small_model();
  objectives::ColorStatsEmbedder embedder;
  std::unique_ptr<localize::SegmentationProvider> segmenter;
  EditConfig cfg;

  explicit Harness(EditConfig c = small_config()) : cfg(std::move(c)) {
    segmenter = make_segmenter(*cfg.segmenter, cfg.source_text);
  }
  EditSession session() { return EditSession(cfg, model, kView, embedder, segmenter.get(), nullptr); }
};

std::vector<double> params_of(const EditSession& s) {
  const auto f = s.editable().params().flat();
  return {f.begin(), f.end()};
}

TEST(EditSession, FixedSeedIsDeterministic) {
  Harness h;
  auto a = h.session();
  auto b = h.session();
  for (int i = 0; i < 4; ++i) {
    const auto ra = a.step(), rb = b.step();
    EXPECT_EQ(ra.total, rb.total) << "step " << i;
    EXPECT_EQ(ra.terms.region, rb.terms.region);
  }
  EXPECT_EQ(params_of(a), params_of(b));
}

TEST(EditSession, ResumeReproducesUninterruptedRun) {
  Harness h;
  auto straight = h.session();
  std::vector<double> totals;
  for (int i = 0; i < 10; ++i) totals.push_back(straight.step().total);

  const auto dir = testing::temp_dir("resume");
  {
    auto first = h.session();
    for (int i = 0; i < 5; ++i) EXPECT_EQ(first.step().total, totals[i]);
    first.save_state(dir);
  }
  auto second = h.session();
  second.load_state(dir);
  EXPECT_EQ(second.step_index(), 5);
  for (int i = 5; i < 10; ++i) EXPECT_EQ(second.step().total, totals[i]) << "step " << i;
  EXPECT_EQ(params_of(second), params_of(straight));
}

TEST(EditSession, ResumeRejectsAnotherPretrainedModel) {
  Harness h;
  auto s = h.session();
  s.step();
  const auto dir = testing::temp_dir("resume_mismatch");
  s.save_state(dir);
  Harness other;
  other.model.coarse.mutable_params().flat()[0] += 0.5f;
  auto t = other.session();
  EXPECT_THROW(t.load_state(dir), ValidationError);
  auto c = small_config();
  c.editable.width = 8;
  Harness narrow(c);
  auto u = narrow.session();
  EXPECT_THROW(u.load_state(dir), ValidationError);
}

TEST(EditSession, PretrainedFieldIsUntouched) {
  Harness h;
  const auto before = h.model.hash();
  const auto params_before = std::vector<float>(h.model.coarse.params().flat().begin(), h.model.coarse.params().flat().end());
  auto s = h.session();
  for (int i = 0; i < 4; ++i) s.step();
  EXPECT_EQ(h.model.hash(), before);
  EXPECT_EQ(s.pretrained_hash(), before);
  EXPECT_TRUE(std::equal(params_before.begin(), params_before.end(), h.model.coarse.params().flat().begin()));
}

TEST(EditSession, RecordsScheduleAndRegularizerActivation) {
  Harness h;
  auto s = h.session();
  std::vector<StepRecord> r;
  for (int i = 0; i < 4; ++i) r.push_back(s.step());
  EXPECT_DOUBLE_EQ(r[0].lr, 5e-3);
  EXPECT_DOUBLE_EQ(r[0].tau.add, 0.8);
  EXPECT_DOUBLE_EQ(r[0].tau.remove, 0.05);
  EXPECT_DOUBLE_EQ(r[0].tau.change, 0.5);
  EXPECT_FALSE(r[2].reg_active);
  EXPECT_TRUE(r[3].reg_active);
  for (const auto& x : r) {
    EXPECT_TRUE(std::isfinite(x.total));
    EXPECT_GE(x.lambda_plus, 30.0);
    EXPECT_EQ(x.mask_source, "segmentation");
  }
}

TEST(EditSession, NeedsAMaskSource) {
  Harness h;
  EXPECT_THROW(EditSession(h.cfg, h.model, kView, h.embedder, nullptr, nullptr), ValidationError);
}

TEST(EditSession, PatchLargerThanViewRejected) {
  auto c = small_config();
  c.patch_size = 32;
  Harness h(c);
  EXPECT_THROW(h.session(), ValidationError);
}

TEST(LearningRate, FullScheduleValues) {
  const objectives::LearningRateSchedule lr;
  EXPECT_NEAR(lr.at(0), 5e-4, 1e-15);
  EXPECT_NEAR(lr.at(500), 3e-4, 1e-15);
  EXPECT_NEAR(lr.at(1000), 1e-4, 1e-15);
  EXPECT_NEAR(lr.at(2000), 1e-4, 1e-15);
}

TEST(Adam, RefusesAFrozenParameterSet) {
  auto m = small_model();
  m.set_trainable(false);
  Adam<float> opt(AdamConfig{}, m.coarse.params().size());
  const auto g = m.coarse.params().zeros_like();
  EXPECT_THROW(opt.step(m.coarse.mutable_params(), g, 1e-3), ValidationError);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
  fields::EditableArchitecture a;
  a.width = 8;
  a.residual_blocks = 1;
  a.color_width = 4;
  a.position = {1, true};
  a.direction = {1, true};
  fields::EditableField<double> f(a, 1);
  auto g = f.params().zeros_like();
  for (auto& v : g.flat()) v = 0.37;
  const std::vector<double> before(f.params().flat().begin(), f.params().flat().end());
  Adam<double> opt(AdamConfig{}, f.params().size());
  opt.step(f.mutable_params(), g, 1e-2);
  // Bias-corrected first step is lr * g / (|g| + eps).
  for (size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i] - f.params().flat()[i], 1e-2, 1e-9);
}

TEST(RunEdit, WritesCheckpointLogAndPreviews) {
  auto c = small_config();
  c.iterations = 3;
  c.preview_every = 2;
  Harness h(c);
  EditRunOptions opt;
  opt.out_dir = testing::temp_dir("run_edit");
  const auto res = run_edit(h.cfg, h.model, kView, h.embedder, h.segmenter.get(), nullptr, opt);
  EXPECT_EQ(res.steps, 3);
  EXPECT_TRUE(std::filesystem::exists(res.checkpoint));
  EXPECT_TRUE(std::filesystem::exists(opt.out_dir / "config.resolved.json"));
  std::ifstream log(res.log);
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<int>(), lines);
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_TRUE(std::filesystem::exists(opt.out_dir / "previews"));
  const auto meta = fields::read_checkpoint_metadata(res.checkpoint);
  EXPECT_EQ(ops_from_metadata(meta), (render::EditOps{true, true, true}));
  EXPECT_EQ(meta.at("steps").get<int>(), 3);
}

#ifdef NERFEDIT_TEST_CACHE_DIR
TEST(DeskPretrain, DensityConcentratesInsideTheSpheres) {
  const auto model = fields::load_pretrained<float>(testing::desk_pretrained_checkpoint());
  auto density_at = [&](const std::vector<Eigen::Vector3f>& pts) {
    Mat3X<float> x(3, pts.size()), d(3, pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      x.col(i) = pts[i];
      d.col(i) = Eigen::Vector3f(0, 0, -1);
    }
    const auto out = model.coarse.forward(x, d);
    return static_cast<double>(out.density.mean());
  };
  const double inside = density_at({{0.6f, 0, 0}, {-0.6f, 0, 0}, {0.6f, 0.2f, 0.1f}, {-0.6f, -0.2f, 0.1f}});
  const double outside = density_at({{0, 1.2f, 0}, {0, -1.2f, 0.3f}, {0, 0, 1.2f}, {1.4f, 1.0f, 0.5f}});
  EXPECT_GE(inside, 10.0 * std::max(outside, 1e-3)) << inside << " vs " << outside;
}
#endif

}  // namespace
}  // namespace nerfedit::train
