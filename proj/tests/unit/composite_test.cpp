// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include "nerfedit/render/composite.hpp"
#include "test_support.hpp"

namespace nerfedit::render {
namespace {

using testing::RayData;
using testing::random_ray;

TEST(Composite, AlphaMatchesDefinition) {
  EXPECT_DOUBLE_EQ(alpha_from(0.0, 0.3), 0.0);
  EXPECT_NEAR(alpha_from(2.0, 0.5), 1.0 - std::exp(-1.0), 1e-15);
}

TEST(Composite, TransmittanceIsExclusiveProduct) {
  Eigen::Array<double, 1, Eigen::Dynamic> s(3), d(3);
  s << 1.0, 2.0, 0.5;
  d << 0.1, 0.2, 0.3;
  auto t = transmittance<double>(s, d);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(t[0], 1.0);
  EXPECT_NEAR(t[1], std::exp(-0.1), 1e-15);
  EXPECT_NEAR(t[3], std::exp(-(0.1 + 0.4 + 0.15)), 1e-15);
}

TEST(Composite, SingleSampleOriginalColor) {
  Eigen::Array<double, 1, Eigen::Dynamic> s(1), d(1);
  s << 1e6;
  d << 1.0;
  Mat3X<double> c(3, 1);
  c << 0.2, 0.4, 0.6;
  auto o = composite_original<double>(d, s, c);
  EXPECT_NEAR(o.opacity, 1.0, 1e-12);
  EXPECT_NEAR(o.color(1), 0.4, 1e-12);
}

TEST(Composite, IdentityEditReproducesOriginal) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto r = random_ray<double>(rng, 8);
    r.sigma_e.setZero();
    r.density_blend.setZero();
    r.color_blend.setZero();
    const auto o = composite_original<double>(r.delta, r.sigma_o, r.color_o);
    const auto b = composite_blended(r.view());
    EXPECT_LE((b.blended - o.color).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(std::abs(b.add), 1e-12);
    EXPECT_LE(std::abs(b.remove), 1e-12);
    EXPECT_LE(std::abs(b.change), 1e-12);
    EXPECT_NEAR(b.opacity, o.opacity, 1e-12);
  }
}

TEST(Composite, FullRemovalGivesUnitRemoveOpacityOnOpaqueRay) {
  Rng rng(3);
  auto r = random_ray<double>(rng, 8);
  r.sigma_o.setConstant(1e4);
  r.sigma_e.setZero();
  r.density_blend.setOnes();
  r.color_blend.setZero();
  const auto b = composite_blended(r.view());
  // Every original alpha is 1: T^o = (1,0,...), T^o' = 1 everywhere.
  EXPECT_NEAR(b.remove, 7.0 / 8.0, 1e-9);
  EXPECT_NEAR(b.opacity, 0.0, 1e-12);
}

TEST(Composite, RemoveIsZeroOnEmptyOriginalRay) {
  Rng rng(4);
  auto r = random_ray<double>(rng, 8);
  r.sigma_o.setZero();
  EXPECT_EQ(composite_blended(r.view()).remove, 0.0);
}

TEST(Composite, ChangeWithFullBlendOnOpaqueSample) {
  Eigen::Array<double, 1, Eigen::Dynamic> d(1), so(1), se(1), bs(1), bc(1);
  d << 1.0;
  so << 1e6;
  se << 0.0;
  bs << 0.0;
  bc << 1.0;
  Mat3X<double> co(3, 1), ce(3, 1);
  co << 1, 0, 0;
  ce << 0, 1, 0;
  const auto b = composite_blended<double>({d, so, co, se, ce, bs, bc});
  EXPECT_NEAR(b.change, 1.0, 1e-12);
  EXPECT_NEAR(b.blended(1), 1.0, 1e-12);
  EXPECT_NEAR(b.editable(1), 1.0, 1e-12);
}

TEST(Composite, OpacitiesStayInUnitIntervalAndRemovalRaisesTransmittance) {
  Rng rng(11);
  BlendedTrace<double> trace;
  for (int trial = 0; trial < 2000; ++trial) {
    auto r = random_ray<double>(rng, 8, trial % 2 ? 50.0 : 3.0);
    const auto b = composite_blended(r.view(), &trace);
    for (double v : {b.add, b.remove, b.change, b.opacity}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    for (size_t k = 0; k < trace.t_original.size(); ++k) EXPECT_GE(trace.t_modified[k], trace.t_original[k]);
  }
}

struct Outputs {
  double blended[3], editable[3], add, remove, change, opacity;
};

Outputs eval(const RayData<double>& r) {
  const auto b = composite_blended(r.view());
  return {{b.blended(0), b.blended(1), b.blended(2)},
          {b.editable(0), b.editable(1), b.editable(2)},
          b.add,
          b.remove,
          b.change,
          b.opacity};
}

double contract(const Outputs& o, const BlendedCotangent<double>& g) {
  double v = g.add * o.add + g.remove * o.remove + g.change * o.change + g.opacity * o.opacity;
  for (int c = 0; c < 3; ++c) v += g.blended(c) * o.blended[c] + g.editable(c) * o.editable[c];
  return v;
}

TEST(Composite, FullGradientsMatchCentralDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto r = random_ray<double>(rng, 8);
    BlendedCotangent<double> g;
    g.blended = Vec3<double>::Random();
    g.editable = Vec3<double>::Random();
    g.add = uniform(rng, -1, 1);
    g.remove = uniform(rng, -1, 1);
    g.change = uniform(rng, -1, 1);
    g.opacity = uniform(rng, -1, 1);
    Eigen::Array<double, 1, Eigen::Dynamic> ds = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(8), dbs = ds, dbc = ds;
    Mat3X<double> dce = Mat3X<double>::Zero(3, 8);
    composite_blended_backward(r.view(), g, GradientRouting::Full, ds, dce, dbs, dbc);
    const double h = 1e-6;
    auto fd = [&](auto& ref) {
      const double keep = ref;
      ref = keep + h;
      const double up = contract(eval(r), g);
      ref = keep - h;
      const double dn = contract(eval(r), g);
      ref = keep;
      return (up - dn) / (2 * h);
    };
    for (int k = 0; k < 8; ++k) {
      EXPECT_NEAR(ds(k), fd(r.sigma_e(k)), 1e-6 * std::max(1.0, std::abs(ds(k))));
      EXPECT_NEAR(dbs(k), fd(r.density_blend(k)), 1e-6 * std::max(1.0, std::abs(dbs(k))));
      EXPECT_NEAR(dbc(k), fd(r.color_blend(k)), 1e-6 * std::max(1.0, std::abs(dbc(k))));
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(dce(c, k), fd(r.color_e(c, k)), 1e-6);
    }
  }
}

TEST(Composite, StopGradientRoutesEachOpacityToItsHead) {
  Rng rng(5);
  auto r = random_ray<double>(rng, 8);
  auto run = [&](BlendedCotangent<double> g) {
    Eigen::Array<double, 1, Eigen::Dynamic> ds = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(8), dbs = ds, dbc = ds;
    Mat3X<double> dce = Mat3X<double>::Zero(3, 8);
    composite_blended_backward(r.view(), g, GradientRouting::StopGradient, ds, dce, dbs, dbc);
    return std::tuple{ds.matrix().norm(), dbs.matrix().norm(), dbc.matrix().norm(), dce.norm()};
  };
  BlendedCotangent<double> add;
  add.add = 1;
  auto [a0, a1, a2, a3] = run(add);
  EXPECT_GT(a0, 0);
  EXPECT_EQ(a1, 0);
  EXPECT_EQ(a2, 0);
  EXPECT_EQ(a3, 0);
  BlendedCotangent<double> rem;
  rem.remove = 1;
  auto [r0, r1, r2, r3] = run(rem);
  EXPECT_EQ(r0, 0);
  EXPECT_GT(r1, 0);
  EXPECT_EQ(r2, 0);
  EXPECT_EQ(r3, 0);
  BlendedCotangent<double> chg;
  chg.change = 1;
  auto [c0, c1, c2, c3] = run(chg);
  EXPECT_EQ(c0, 0);
  EXPECT_EQ(c1, 0);
  EXPECT_GT(c2, 0);
  EXPECT_EQ(c3, 0);
}

TEST(Composite, RoutedAddGradientKeepsOnlyTheEditableDensityPath) {
  // d/d sigma_e of sum_k T^b_k alpha^e_k with everything but sigma_e frozen is
  // the exact derivative, since T^b depends on sigma_e as well.
  Rng rng(6);
  auto r = random_ray<double>(rng, 8);
  BlendedCotangent<double> g;
  g.add = 1;
  Eigen::Array<double, 1, Eigen::Dynamic> ds = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(8), dbs = ds, dbc = ds;
  Mat3X<double> dce = Mat3X<double>::Zero(3, 8);
  composite_blended_backward(r.view(), g, GradientRouting::StopGradient, ds, dce, dbs, dbc);
  for (int k = 0; k < 8; ++k) {
    const double keep = r.sigma_e(k), h = 1e-6;
    r.sigma_e(k) = keep + h;
    const double up = composite_blended(r.view()).add;
    r.sigma_e(k) = keep - h;
    const double dn = composite_blended(r.view()).add;
    r.sigma_e(k) = keep;
    EXPECT_NEAR(ds(k), (up - dn) / (2 * h), 1e-7);
  }
}

TEST(Composite, OriginalBackwardMatchesCentralDifferences) {
  Rng rng(9);
  auto r = random_ray<double>(rng, 8);
  const Vec3<double> gc(0.3, -0.7, 0.2);
  const double go = 0.4;
  Eigen::Array<double, 1, Eigen::Dynamic> ds = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(8);
  Mat3X<double> dc = Mat3X<double>::Zero(3, 8);
  composite_original_backward<double>(r.delta, r.sigma_o, r.color_o, gc, go, ds, dc);
  auto f = [&] {
    auto o = composite_original<double>(r.delta, r.sigma_o, r.color_o);
    return gc.dot(o.color) + go * o.opacity;
  };
  for (int k = 0; k < 8; ++k) {
    const double keep = r.sigma_o(k), h = 1e-6;
    r.sigma_o(k) = keep + h;
    const double up = f();
    r.sigma_o(k) = keep - h;
    const double dn = f();
    r.sigma_o(k) = keep;
    EXPECT_NEAR(ds(k), (up - dn) / (2 * h), 1e-7);
  }
}

}  // namespace
}  // namespace nerfedit::render

namespace nerfedit::render {
namespace {

TEST(Composite, BlendSamplesHalfColorBlend) {
  fields::FieldOutput<double> o{2.0, Vec3<double>(1, 0, 0)};
  fields::EditableOutput<double> e{0.0, Vec3<double>(0, 1, 0), 0.0, 0.5};
  auto [s, c] = blend_samples(o, e);
  EXPECT_DOUBLE_EQ(s, 2.0);
  EXPECT_DOUBLE_EQ(c(0), 0.5);
  EXPECT_DOUBLE_EQ(c(1), 0.5);
  EXPECT_DOUBLE_EQ(c(2), 0.0);
  e.density_blend = 1.0;
  EXPECT_DOUBLE_EQ(blend_samples(o, e).first, 0.0);
}

TEST(Composite, OriginalOpacityHandExpansions) {
  Eigen::Array<double, 1, Eigen::Dynamic> s(1), d(1);
  s << 2.0;
  d << 0.5;
  Mat3X<double> c = Mat3X<double>::Ones(3, 1);
  EXPECT_NEAR(composite_original<double>(d, s, c).opacity, 1.0 - std::exp(-1.0), 1e-15);
  Eigen::Array<double, 1, Eigen::Dynamic> s2(2), d2(2);
  s2 << 1.5, 1.5;
  d2 << 0.4, 0.4;
  const double a = 1.0 - std::exp(-0.6);
  EXPECT_NEAR(composite_original<double>(d2, s2, Mat3X<double>::Ones(3, 2)).opacity, a + (1 - a) * a, 1e-15);
  s2.setZero();
  auto empty = composite_original<double>(d2, s2, Mat3X<double>::Ones(3, 2));
  EXPECT_EQ(empty.opacity, 0.0);
  EXPECT_EQ(empty.color.norm(), 0.0);
}

TEST(Composite, RemovalHandExpansions) {
  Rng rng(1);
  auto one = testing::random_ray<double>(rng, 1);
  one.density_blend.setOnes();
  EXPECT_EQ(composite_blended(one.view()).remove, 0.0);

  auto two = testing::random_ray<double>(rng, 2);
  two.sigma_o.setConstant(1.3);
  two.delta.setConstant(0.7);
  two.density_blend.setOnes();
  two.sigma_e.setZero();
  const double a = 1.0 - std::exp(-1.3 * 0.7);
  EXPECT_NEAR(composite_blended(two.view()).remove, a / 2, 1e-15);
}

}  // namespace
}  // namespace nerfedit::render
