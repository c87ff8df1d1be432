// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>

#include "nerfedit/fields/checkpoint.hpp"
#include "nerfedit/fields/encoding.hpp"
#include "nerfedit/fields/model.hpp"
#include "nerfedit/fields/radiance_field.hpp"
#include "test_support.hpp"

namespace nerfedit::fields {
namespace {

TEST(Encoding, IdentityOnlyWhenNoFrequencies) {
  const std::vector<double> v{0.1, 0.2, 0.3};
  auto e = positional_encode<double>(v, {0, true});
  EXPECT_EQ(e, v);
}

TEST(Encoding, ZeroInputGivesZeroSinesAndUnitCosines) {
  const std::vector<double> v{0, 0, 0};
  auto e = positional_encode<double>(v, {2, false});
  ASSERT_EQ(e.size(), 12u);
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(e[l * 6 + i], 0.0);
      EXPECT_EQ(e[l * 6 + 3 + i], 1.0);
    }
}

TEST(Encoding, OutputDimension) {
  EXPECT_EQ((EncodingConfig{10, true}.output_dim(3)), 63);
  const std::vector<double> v{0.3, -0.2, 0.9};
  EXPECT_EQ(positional_encode<double>(v, {10, true}).size(), 63u);
}

TEST(Encoding, RejectsNonFinite) {
  const std::vector<double> v{0.3, std::nan(""), 0.9};
  EXPECT_THROW(positional_encode<double>(v, {2, true}), ValidationError);
}

TEST(Encoding, BatchMatchesSingleAndVjpMatchesDifferences) {
  Mat3X<double> x = Mat3X<double>::Random(3, 4);
  const EncodingConfig cfg{3, true};
  Mat<double> enc = encode_batch(x, cfg);
  for (int j = 0; j < 4; ++j) {
    std::vector<double> v{x(0, j), x(1, j), x(2, j)};
    auto e = positional_encode<double>(v, cfg);
    for (size_t r = 0; r < e.size(); ++r) EXPECT_NEAR(enc(r, j), e[r], 1e-14);
  }
  Mat<double> g = Mat<double>::Random(enc.rows(), enc.cols());
  Mat3X<double> dx = encode_batch_vjp(x, g, cfg);
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 3; ++i) {
      Mat3X<double> up = x, dn = x;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd = ((encode_batch(up, cfg) - encode_batch(dn, cfg)).cwiseProduct(g)).sum() / (2 * h);
      EXPECT_NEAR(dx(i, j), fd, 1e-6);
    }
}

PretrainedArchitecture small_pretrained() {
  PretrainedArchitecture a;
  a.depth = 3;
  a.width = 16;
  a.skip_layer = 2;
  a.color_width = 8;
  a.position = {3, true};
  a.direction = {2, true};
  return a;
}

EditableArchitecture small_editable() {
  EditableArchitecture a;
  a.width = 16;
  a.residual_blocks = 1;
  a.color_width = 8;
  a.position = {3, true};
  a.direction = {2, true};
  a.density_head_scale = 1.0;
  return a;
}

Mat3X<double> unit_dirs(int n, Rng& rng) {
  Mat3X<double> d(3, n);
  for (int i = 0; i < n; ++i) {
    Vec3<double> v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    d.col(i) = v.normalized();
  }
  return d;
}

TEST(PretrainedField, DeterministicAndInRange) {
  PretrainedField<double> f(small_pretrained(), 3);
  Rng rng(2);
  Mat3X<double> x = Mat3X<double>::Random(3, 50) * 2;
  Mat3X<double> d = unit_dirs(50, rng);
  auto a = f.forward(x, d), b = f.forward(x, d);
  EXPECT_EQ(a.density, b.density);
  EXPECT_EQ(a.color, b.color);
  EXPECT_GE(a.density.minCoeff(), 0.0);
  EXPECT_GE(a.color.minCoeff(), 0.0);
  EXPECT_LE(a.color.maxCoeff(), 1.0);
  EXPECT_FALSE(f.params().trainable());
}

TEST(PretrainedField, BackwardMatchesCentralDifferences) {
  PretrainedField<double> f(small_pretrained(), 5);
  // Bias density upward so ReLU is active on most samples.
  f.mutable_params().matrix(f.mutable_params().find("density.bias")).setConstant(0.5);
  Rng rng(3);
  const int n = 6;
  Mat3X<double> x = Mat3X<double>::Random(3, n);
  Mat3X<double> d = unit_dirs(n, rng);
  Row<double> gs = Row<double>::Random(n);
  Mat3X<double> gc = Mat3X<double>::Random(3, n);
  typename PretrainedField<double>::Cache cache;
  f.forward(x, d, &cache);
  auto grads = f.params().zeros_like();
  f.backward(cache, gs, gc, grads);
  auto loss = [&] {
    auto o = f.forward(x, d);
    return o.density.cwiseProduct(gs).sum() + o.color.cwiseProduct(gc).sum();
  };
  auto flat = f.mutable_params().flat();
  const double h = 1e-6;
  for (size_t i = 0; i < flat.size(); i += 7) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double up = loss();
    flat[i] = keep - h;
    const double dn = loss();
    flat[i] = keep;
    const double fd = (up - dn) / (2 * h);
    EXPECT_NEAR(grads.flat()[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << "param " << i;
  }
}

TEST(EditableField, ZeroDensityHeadAndMidpointBlends) {
  EditableField<double> f(small_editable(), 1);
  f.zero_density_head();
  f.set_blend_logits(0.0, 0.0);
  Rng rng(4);
  Mat3X<double> x = Mat3X<double>::Random(3, 20);
  auto o = f.forward(x, unit_dirs(20, rng));
  EXPECT_EQ(o.density.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(o.density_blend.minCoeff(), 0.5, 1e-15);
  EXPECT_NEAR(o.color_blend.maxCoeff(), 0.5, 1e-15);
}

TEST(EditableField, DefaultInitStartsNearIdentityBlend) {
  EditableArchitecture a = small_editable();
  a.density_head_scale = 0.0;
  EditableField<double> f(a, 9);
  Rng rng(4);
  auto o = f.forward(Mat3X<double>::Random(3, 20), unit_dirs(20, rng));
  EXPECT_EQ(o.density.maxCoeff(), 0.0);
  EXPECT_NEAR(o.density_blend.mean(), 0.05, 0.01);
  EXPECT_NEAR(o.color_blend.mean(), 0.05, 0.01);
}

TEST(EditableField, BackwardMatchesCentralDifferences) {
  EditableField<double> f(small_editable(), 7);
  f.mutable_params().matrix(f.mutable_params().find("density.bias")).setConstant(0.5);
  Rng rng(8);
  const int n = 6;
  Mat3X<double> x = Mat3X<double>::Random(3, n);
  Mat3X<double> d = unit_dirs(n, rng);
  EditableGrad<double> g{Row<double>::Random(n), Mat3X<double>::Random(3, n), Row<double>::Random(n),
                         Row<double>::Random(n)};
  typename EditableField<double>::Cache cache;
  f.forward(x, d, &cache);
  auto grads = f.params().zeros_like();
  f.backward(cache, g, grads);
  auto loss = [&] {
    auto o = f.forward(x, d);
    return o.density.cwiseProduct(g.density).sum() + o.color.cwiseProduct(g.color).sum() +
           o.density_blend.cwiseProduct(g.density_blend).sum() + o.color_blend.cwiseProduct(g.color_blend).sum();
  };
  auto flat = f.mutable_params().flat();
  const double h = 1e-6;
  for (size_t i = 0; i < flat.size(); i += 5) {
    const double keep = flat[i];
    flat[i] = keep + h;
    const double up = loss();
    flat[i] = keep - h;
    const double dn = loss();
    flat[i] = keep;
    const double fd = (up - dn) / (2 * h);
    EXPECT_LE(testing::relative_error(grads.flat()[i], fd, 1e-5), 1e-4) << "param " << i;
  }
}

TEST(EditableField, HeadParametersPartitionTheHeads) {
  EditableField<float> f(small_editable(), 1);
  auto h = f.head_params();
  EXPECT_EQ(h.density.size(), 2u);
  EXPECT_EQ(h.density_blend.size(), 2u);
  EXPECT_EQ(h.color_blend.size(), 2u);
  EXPECT_EQ(h.color.size(), 6u);
}

TEST(Checkpoint, PretrainedRoundTripPreservesParameters) {
  const auto dir = testing::temp_dir("ckpt");
  PretrainedModel<float> m{PretrainedField<float>(small_pretrained(), 4), PretrainedField<float>(small_pretrained(), 5)};
  save_pretrained(dir / "scene.json", m);
  auto back = load_pretrained<float>(dir / "scene.json");
  EXPECT_EQ(back.hash(), m.hash());
  ASSERT_TRUE(back.fine.has_value());
  EXPECT_EQ(back.coarse.architecture(), small_pretrained());
  EXPECT_FALSE(back.coarse.params().trainable());
}

TEST(Checkpoint, EditableRoundTripPreservesParameters) {
  const auto dir = testing::temp_dir("ckpt_e");
  EditableField<float> f(small_editable(), 2);
  save_editable(dir / "edit.json", f);
  auto back = load_editable<float>(dir / "edit.json");
  EXPECT_EQ(back.params().hash(), f.params().hash());
  EXPECT_EQ(back.architecture(), small_editable());
}

TEST(Checkpoint, RejectsTruncatedPayload) {
  const auto dir = testing::temp_dir("ckpt_t");
  PretrainedModel<float> m{PretrainedField<float>(small_pretrained(), 4), std::nullopt};
  save_pretrained(dir / "scene.json", m);
  std::filesystem::resize_file(dir / "scene.bin", 16);
  EXPECT_THROW(load_pretrained<float>(dir / "scene.json"), std::exception);
}

TEST(Checkpoint, MissingManifestIsAnError) {
  EXPECT_THROW(load_pretrained<float>("/nonexistent/scene.json"), std::exception);
}

}  // namespace
}  // namespace nerfedit::fields
