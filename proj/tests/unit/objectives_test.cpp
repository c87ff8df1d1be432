// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include "nerfedit/objectives/embedding.hpp"
#include "nerfedit/objectives/losses.hpp"
#include "nerfedit/objectives/schedule.hpp"
#include "test_support.hpp"

namespace nerfedit::objectives {
namespace {

Embedding vec(std::initializer_list<double> v) {
  Embedding e(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) e(i++) = x;
  return e;
}

/// Image embedding = the first pixel's RGB; texts from a table.
class LookupEmbedder final : public EmbeddingProvider {
 public:
  std::map<std::string, Embedding> texts;
  [[nodiscard]] int dim() const override { return 3; }
  Embedding embed_image(const Image<double>& img) override { return vec({img.data[0], img.data[1], img.data[2]}); }
  Image<double> embed_image_vjp(const Image<double>& img, const Embedding& g) override {
    Image<double> out(img.width, img.height, 3);
    for (int c = 0; c < 3; ++c) out.data[c] = g(c);
    return out;
  }
  Embedding embed_text(std::string_view t) override { return texts.at(std::string(t)); }
};

Image<double> pixel(double r, double g, double b) {
  Image<double> img(1, 1, 3);
  img.data = {r, g, b};
  return img;
}

TEST(GlobalLoss, CosineDistanceCases) {
  EXPECT_NEAR(global_loss(vec({1, 2, 3}), vec({1, 2, 3})), 0.0, 1e-15);
  EXPECT_NEAR(global_loss(vec({1, 0, 0}), vec({0, 1, 0})), 1.0, 1e-15);
  EXPECT_NEAR(global_loss(vec({1, 0, 0}), vec({-1, 0, 0})), 2.0, 1e-15);
  EXPECT_THROW(global_loss(vec({0, 0, 0}), vec({1, 0, 0})), ValidationError);
}

TEST(GlobalLoss, ThroughProvider) {
  LookupEmbedder e;
  e.texts["x"] = vec({0, 1, 0});
  EXPECT_NEAR(global_clip_loss(pixel(1, 0, 0), "x", e), 1.0, 1e-15);
}

TEST(DirectionalLoss, ParallelAntiparallelAndOrthogonal) {
  const auto a = vec({0.2, 0.1, 0.0}), b = vec({0.0, 0.3, 0.1});
  EXPECT_NEAR(directional_loss(a + vec({1, 2, 0}), a, b + vec({1, 2, 0}), b), 0.0, 1e-12);
  EXPECT_NEAR(directional_loss(a + vec({1, 2, 0}), a, b - vec({1, 2, 0}), b), 2.0, 1e-12);
  LookupEmbedder e;
  e.texts["src"] = vec({0, 0, 1});
  e.texts["tgt"] = vec({0, 1, 1});
  // dI = (1,0,0), dT = (0,1,0)
  EXPECT_NEAR(directional_clip_loss(pixel(1, 0, 0.5), "tgt", pixel(0, 0, 0.5), "src", e), 1.0, 1e-15);
}

TEST(DirectionalLoss, DegenerateDirectionContributesZero) {
  Embedding g;
  EXPECT_EQ(directional_loss(vec({1, 0, 0}), vec({1, 0, 0}), vec({0, 1, 0}), vec({1, 0, 0}), &g), 0.0);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(DirectionalLoss, GradientMatchesCentralDifferences) {
  const auto it = vec({0.3, 0.5, 0.2}), is = vec({0.4, 0.1, 0.6}), tt = vec({0.1, 0.9, 0.3}), ts = vec({0.7, 0.2, 0.1});
  Embedding g;
  directional_loss(it, is, tt, ts, &g);
  for (int i = 0; i < 3; ++i) {
    Embedding up = it, dn = it;
    up(i) += 1e-6;
    dn(i) -= 1e-6;
    EXPECT_NEAR(g(i), (directional_loss(up, is, tt, ts) - directional_loss(dn, is, tt, ts)) / 2e-6, 1e-8);
  }
}

std::vector<ClipSample> batch_of(const Image<double>& o, const Image<double>& e, const Image<double>& b, int n) {
  return std::vector<ClipSample>(n, ClipSample{o, e, b, "a red ball", "a green ball"});
}

TEST(ClipObjective, WithoutGlobalTermEqualsDirectional) {
  ColorStatsEmbedder emb;
  const auto o = pixel(0.8, 0.1, 0.1), e = pixel(0.1, 0.6, 0.2), b = pixel(0.4, 0.4, 0.1);
  auto r = clip_objective(batch_of(o, e, b, 3), 0.0, emb, false);
  EXPECT_NEAR(r.value, directional_clip_loss(b, "a green ball", o, "a red ball", emb), 1e-15);
  auto r2 = clip_objective(batch_of(o, e, b, 3), 0.5, emb, false);
  EXPECT_NEAR(r2.value, r.value + 0.5 * (global_clip_loss(b, "a green ball", emb) + global_clip_loss(e, "a green ball", emb)),
              1e-15);
}

TEST(ClipObjective, AllEqualEmbeddingsGiveZero) {
  LookupEmbedder emb;
  emb.texts["a red ball"] = vec({1, 0, 0});
  emb.texts["a green ball"] = vec({1, 0, 0});
  const auto img = pixel(1, 0, 0);
  EXPECT_NEAR(clip_objective(batch_of(img, img, img, 4), 0.5, emb, false).value, 0.0, 1e-15);
}

TEST(ClipObjective, ImageGradientsMatchCentralDifferences) {
  ColorStatsEmbedder emb;
  Rng rng(3);
  Image<double> o(4, 4, 3), e(4, 4, 3), b(4, 4, 3);
  for (auto* img : {&o, &e, &b})
    for (double& v : img->data) v = uniform(rng, 0.1, 0.9);
  auto r = clip_objective(batch_of(o, e, b, 2), 0.5, emb, true);
  ASSERT_EQ(r.grad_blended.size(), 2u);
  auto value = [&] { return clip_objective(batch_of(o, e, b, 2), 0.5, emb, false).value; };
  for (size_t i = 0; i < b.data.size(); i += 5) {
    for (auto [img, grad] : {std::pair{&b, &r.grad_blended}, std::pair{&e, &r.grad_editable}}) {
      const double keep = img->data[i];
      img->data[i] = keep + 1e-6;
      const double up = value();
      img->data[i] = keep - 1e-6;
      const double dn = value();
      img->data[i] = keep;
      EXPECT_NEAR((*grad)[0].data[i] + (*grad)[1].data[i], (up - dn) / 2e-6, 1e-7);
    }
  }
}

TEST(ColorStats, TextsMapToNamedColors) {
  ColorStatsEmbedder emb;
  EXPECT_GT(emb.embed_text("a photo of a green sphere")(1), 0.9);
  EXPECT_GT(emb.embed_text("red")(0), 0.9);
  // greenish is not the word green
  EXPECT_NEAR(emb.embed_text("a greenish sphere")(0), emb.embed_text("a sphere")(0), 1e-15);
  auto e = emb.embed_image(Image<double>(2, 2, 3, 0.0));
  EXPECT_NEAR(e.norm(), 1.0, 1e-12);
}

localize::RegionMasks masks_2x2() {
  localize::RegionMasks m;
  m.positive = localize::make_mask(2, 2);
  m.negative = localize::make_mask(2, 2);
  m.positive.data = {1, 1, 0, 0};
  m.negative.data = {0, 0, 1, 0};
  m.lambda_plus = 3.0;
  return m;
}

TEST(RegionLoss, PerfectLocalizationIsZero) {
  auto m = masks_2x2();
  Image<double> add(2, 2, 1), remove(2, 2, 1), change(2, 2, 1);
  change.data = {1, 0.5, 0, 0.7};
  add.data = {0, 0.5, 0, 0};
  EXPECT_NEAR(region_loss(add, remove, change, m), 0.0, 1e-15);
}

TEST(RegionLoss, ZeroOpacityPaysLambdaPlus) {
  auto m = masks_2x2();
  Image<double> z(2, 2, 1);
  EXPECT_NEAR(region_loss(z, z, z, m), 3.0, 1e-15);
}

TEST(RegionLoss, EmptyMasksAreVacuous) {
  localize::RegionMasks m;
  m.positive = m.negative = localize::make_mask(2, 2);
  Image<double> z(2, 2, 1, 0.4);
  EXPECT_EQ(region_loss(z, z, z, m), 0.0);
}

TEST(RegionLoss, GradientMatchesCentralDifferences) {
  auto m = masks_2x2();
  Image<double> a(2, 2, 1), r(2, 2, 1), c(2, 2, 1);
  a.data = {0.1, 0.3, 0.2, 0.6};
  Image<double> g;
  region_loss(a, r, c, m, &g);
  for (int i = 0; i < 4; ++i) {
    Image<double> up = a, dn = a;
    up.data[i] += 1e-6;
    dn.data[i] -= 1e-6;
    EXPECT_NEAR(g.data[i], (region_loss(up, r, c, m) - region_loss(dn, r, c, m)) / 2e-6, 1e-8);
  }
}

TEST(OpacityLoss, HandSumOfMaxima) {
  EXPECT_NEAR(opacity_loss({0.1, 0.0, 0.05}, {0.2, 0.05, 0.1}, {true, true, true}), 0.35, 1e-15);
}

TEST(OpacityLoss, FloorBelowThresholdWithZeroGradient) {
  OpacityValues d;
  EXPECT_NEAR(opacity_loss({0.01, 0.0, 0.02}, {0.2, 0.05, 0.1}, {true, true, true}, &d), 0.35, 1e-15);
  EXPECT_EQ(d.add + d.remove + d.change, 0.0);
}

TEST(OpacityLoss, DisabledOperationsContributeNothing) {
  EXPECT_NEAR(opacity_loss({0.9, 0.9, 0.3}, {0.2, 0.05, 0.1}, {false, false, true}), 0.3, 1e-15);
}

TEST(OpacityLoss, NonDecreasingInEachMean) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    OpacityValues m{uniform01(rng), uniform01(rng), uniform01(rng)}, tau{uniform01(rng), uniform01(rng), uniform01(rng)};
    OpacityValues m2 = m;
    m2.change += 0.01;
    EXPECT_GE(opacity_loss(m2, tau, {true, true, true}), opacity_loss(m, tau, {true, true, true}));
  }
}

TEST(Anneal, EndpointsAndMidpoint) {
  AnnealSchedule s{0.8, 0.2, 100};
  EXPECT_DOUBLE_EQ(anneal(s, 0), 0.8);
  EXPECT_NEAR(anneal(s, 50), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(anneal(s, 100), 0.2);
  EXPECT_DOUBLE_EQ(anneal(s, 5000), 0.2);
}

TEST(Anneal, AddThresholdStartsAtPointEight) {
  OpacityThresholds t;
  t.add.target = 0.3;
  EXPECT_DOUBLE_EQ(t.at(0).add, 0.8);
  EXPECT_DOUBLE_EQ(t.at(100).add, 0.3);
  EXPECT_DOUBLE_EQ(t.at(0).remove, 0.05);
  EXPECT_DOUBLE_EQ(t.at(777).remove, 0.05);
}

TEST(Thresholds, EnabledOperationsNeedTargets) {
  OpacityThresholds t;
  EXPECT_THROW(t.validate({true, false, false}), ValidationError);
  EXPECT_NO_THROW(t.validate({false, true, false}));
  t.change.target = 0.1;
  EXPECT_NO_THROW(t.validate({false, true, true}));
}

TEST(RegLoss, EntropyValues) {
  EXPECT_NEAR(reg_loss(Image<double>(3, 3, 1, 0.5)), 1.0, 1e-15);
  EXPECT_NEAR(reg_loss(Image<double>(3, 3, 1, 0.25)), 0.8113, 1e-4);
  Image<double> bin(2, 1, 1);
  bin.data = {0.0, 1.0};
  EXPECT_LT(reg_loss(bin), 1e-4);
}

TEST(RegLoss, BoundedAndDifferentiable) {
  Rng rng(7);
  Image<double> a(4, 4, 1);
  for (double& v : a.data) v = uniform(rng, 0.01, 0.99);
  Image<double> g;
  const double v = reg_loss(a, &g);
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1.0);
  for (int i = 0; i < 16; ++i) {
    Image<double> up = a, dn = a;
    up.data[i] += 1e-6;
    dn.data[i] -= 1e-6;
    EXPECT_NEAR(g.data[i], (reg_loss(up) - reg_loss(dn)) / 2e-6, 1e-8);
  }
}

TEST(TotalLoss, DefaultsAndActivation) {
  LossWeights w;
  EXPECT_EQ(w.lambda_region, 1.0);
  EXPECT_EQ(w.lambda_opacity, 2.0);
  EXPECT_EQ(w.lambda_reg, 0.2);
  EXPECT_EQ(w.lambda_global, 0.5);
  LossTerms t{0.1, 0.2, 0.3, 0.5};
  EXPECT_NEAR(total_loss(t, w, 999), 0.1 + 0.2 + 0.6, 1e-15);
  EXPECT_NEAR(total_loss(t, w, 1000), 0.1 + 0.2 + 0.6 + 0.1, 1e-15);
}

TEST(TotalLoss, FloorIsTwiceThresholdSum) {
  LossWeights w;
  const OpacityValues tau{0.2, 0.05, 0.1};
  LossTerms t{0, 0, opacity_loss({0, 0, 0}, tau, {true, true, true}), 0};
  EXPECT_NEAR(total_loss(t, w, 0), 2.0 * 0.35, 1e-15);
}

TEST(LearningRate, ScheduleValues) {
  LearningRateSchedule lr;
  EXPECT_NEAR(lr.at(0), 5e-4, 1e-18);
  EXPECT_NEAR(lr.at(500), 3e-4, 1e-18);
  EXPECT_NEAR(lr.at(1000), 1e-4, 1e-18);
  EXPECT_NEAR(lr.at(2000), 1e-4, 1e-18);
}

TEST(Routing, ChannelsPerOpacity) {
  EXPECT_TRUE(routed_channels(OpacityKind::Add).density);
  EXPECT_FALSE(routed_channels(OpacityKind::Add).color_blend);
  EXPECT_TRUE(routed_channels(OpacityKind::Remove).density_blend);
  EXPECT_TRUE(routed_channels(OpacityKind::Change).color_blend);
  EXPECT_FALSE(routed_channels(OpacityKind::Change).color);
}

}  // namespace
}  // namespace nerfedit::objectives
