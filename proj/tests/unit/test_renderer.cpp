// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "nerfsr/data.hpp"
#include "nerfsr/renderer.hpp"
#include "test_util.hpp"

namespace nerfsr {
namespace {

RayBundle unit_interval_rays(int count) {
  RayBundle rays;
  rays.grid_height = 1;
  rays.grid_width = count;
  rays.origins.assign(count, Vec3::Zero());
  rays.directions.assign(count, Vec3::UnitX());
  rays.near = 0.0;
  rays.far = 1.0;
  return rays;
}

TEST(SamplePoints, MidpointsWithoutStratification) {
  Rng rng(0);
  const RaySamples s = sample_points(unit_interval_rays(1), 4, false, rng);
  const std::vector<double> expected{0.125, 0.375, 0.625, 0.875};
  ASSERT_EQ(s.t.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.t[i], expected[i]);
  double total = 0.0;
  for (double d : s.deltas) total += d;
  EXPECT_NEAR(total, 1.0, 1e-15);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.deltas[i], 0.25, 1e-15);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(s.positions[i], Vec3(s.t[i], 0, 0));
}

TEST(SamplePoints, StratifiedDrawsStayInTheirBins) {
  Rng rng(1);
  RayBundle rays = unit_interval_rays(200);
  rays.near = 2.0;
  rays.far = 6.0;
  const int n = 16;
  const RaySamples s = sample_points(rays, n, true, rng);
  for (std::size_t r = 0; r < rays.size(); ++r)
    for (int i = 0; i < n; ++i) {
      const double t = s.t[r * n + i];
      EXPECT_GE(t, 2.0 + 4.0 * i / n);
      EXPECT_LT(t, 2.0 + 4.0 * (i + 1) / n);
      if (i > 0) EXPECT_GT(t, s.t[r * n + i - 1]);
    }
}

TEST(SamplePoints, SingleSample) {
  Rng rng(2);
  RayBundle rays = unit_interval_rays(1);
  rays.near = 2.0;
  rays.far = 6.0;
  const RaySamples s = sample_points(rays, 1, false, rng);
  EXPECT_DOUBLE_EQ(s.t[0], 4.0);
  EXPECT_DOUBLE_EQ(s.deltas[0], 4.0);
}

TEST(SamplePoints, ZeroSamplesIsError) {
  Rng rng(3);
  EXPECT_THROW(sample_points(unit_interval_rays(1), 0, false, rng), ConfigError);
}

TEST(Composite, EmptySpaceGivesBackground) {
  const std::vector<double> sigma(8, 0.0), delta(8, 0.1);
  const std::vector<Vec3> color(8, Vec3(0.3, 0.2, 0.9));
  const Vec3 bg(0.1, 0.7, 0.4);
  const CompositeResult r = composite(sigma, color, delta, 4, bg);
  ASSERT_EQ(r.colors.size(), 2u);
  for (const Vec3& c : r.colors) EXPECT_EQ(c, bg);
  for (double w : r.weights) EXPECT_EQ(w, 0.0);
}

TEST(Composite, OneSampleHalfOpacity) {
  const std::vector<double> sigma{std::log(2.0)}, delta{1.0};
  const std::vector<Vec3> color{Vec3(1, 0, 0)};
  const CompositeResult r = composite(sigma, color, delta, 1, Vec3::Zero());
  EXPECT_NEAR(r.weights[0], 0.5, 1e-15);
  EXPECT_LT((r.colors[0] - Vec3(0.5, 0, 0)).norm(), 1e-15);
}

TEST(Composite, TwoSamplesHalfOpacity) {
  const std::vector<double> sigma{2.0 * std::log(2.0), std::log(2.0)}, delta{0.5, 1.0};
  const std::vector<Vec3> color{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const CompositeResult r = composite(sigma, color, delta, 2, Vec3::Zero());
  EXPECT_NEAR(r.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(r.weights[1], 0.25, 1e-15);  // T2 = 0.5
  EXPECT_LT((r.colors[0] - Vec3(0.5, 0.25, 0)).norm(), 1e-15);
}

TEST(Composite, NegativeInputsAreErrors) {
  const std::vector<Vec3> color{Vec3::Zero()};
  const std::vector<double> neg{-1.0}, pos{1.0};
  EXPECT_THROW(composite(neg, color, pos, 1, Vec3::Zero()), NumericError);
  EXPECT_THROW(composite(pos, color, neg, 1, Vec3::Zero()), NumericError);
}

struct ScalarResult {
  Vec3 color;
  std::vector<double> transmittance;  // T_1 .. T_{N+1}
};

/// Direct product form, no log-space accumulation.
ScalarResult scalar_composite(const double* sigma, const Vec3* color, const double* delta, int n,
                              const Vec3& bg) {
  ScalarResult out;
  out.color = Vec3::Zero();
  double t = 1.0;
  for (int i = 0; i < n; ++i) {
    out.transmittance.push_back(t);
    const double alpha = 1.0 - std::exp(-sigma[i] * delta[i]);
    out.color += t * alpha * color[i];
    t *= std::exp(-sigma[i] * delta[i]);
  }
  out.transmittance.push_back(t);
  out.color += t * bg;
  return out;
}

TEST(Composite, MatchesScalarOracleOnRandomRays) {
  Rng rng(4);
  const int m = 100, n = 32;
  std::vector<double> sigma(m * n), delta(m * n);
  std::vector<Vec3> color(m * n);
  for (int k = 0; k < m * n; ++k) {
    sigma[k] = uniform01(rng) < 0.3 ? 0.0 : 20.0 * uniform01(rng);
    delta[k] = 0.1 * uniform01(rng);
    color[k] = Vec3(uniform01(rng), uniform01(rng), uniform01(rng));
  }
  const Vec3 bg(1, 1, 1);
  const CompositeResult r = composite(sigma, color, delta, n, bg);
  for (int ray = 0; ray < m; ++ray) {
    const int o = ray * n;
    const ScalarResult ref = scalar_composite(&sigma[o], &color[o], &delta[o], n, bg);
    EXPECT_LE((r.colors[ray] - ref.color).cwiseAbs().maxCoeff(), 1e-5);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = r.weights[o + i];
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
      wsum += w;
      EXPECT_LE(ref.transmittance[i + 1], ref.transmittance[i]);
    }
    EXPECT_NEAR(wsum + ref.transmittance[n], 1.0, 1e-6);
  }
}

TEST(Composite, HugeOpticalDepthStaysFinite) {
  const std::vector<double> sigma{1e6, 1e6}, delta{1.0, 1.0};
  const std::vector<Vec3> color{Vec3(0.2, 0.4, 0.6), Vec3(1, 1, 1)};
  const CompositeResult r = composite(sigma, color, delta, 2, Vec3::Ones());
  EXPECT_TRUE(r.colors[0].allFinite());
  EXPECT_LT((r.colors[0] - color[0]).norm(), 1e-12);
}

FieldConfig small_field_config() {
  FieldConfig c;
  c.resolution = {6, 6, 6};
  c.density_rank = 2;
  c.appearance_rank = 2;
  c.appearance_channels = 4;
  c.hidden_width = 8;
  c.view_frequencies = 1;
  c.density_shift = 1.0;
  c.density_scale = 1.0;
  c.init_scale = 0.5;
  return c;
}

CameraModel small_camera(int size = 12) {
  return CameraModel::centered(size, size, 1.2 * size, look_at(Vec3(3.2, 1.5, 1.0), Vec3::Zero(), Vec3::UnitZ()),
                               2.0, 6.0);
}

TEST(RenderImage, ZeroDensityGivesBackground) {
  // The shifted softplus underflows to an exact zero density.
  FieldConfig c = small_field_config();
  c.density_shift = -800.0;
  RadianceField empty(c, 5);
  RenderConfig rc;
  rc.n_samples = 32;
  rc.background = Vec3(0.2, 0.5, 0.9);
  const RenderOutput out = render_image(empty, small_camera(), rc);
  for (int y = 0; y < out.rgb.height; ++y)
    for (int x = 0; x < out.rgb.width; ++x) {
      for (int k = 0; k < 3; ++k) EXPECT_EQ(out.rgb(y, x, k), rc.background[k]);
      EXPECT_EQ(out.accumulation(y, x, 0), 0.0);
    }
}

TEST(RenderImage, ChunkSizeIsInvisible) {
  RadianceField field(small_field_config(), 6);
  RenderConfig rc;
  rc.n_samples = 24;
  rc.stratified = true;
  rc.seed = 99;
  rc.chunk_size = 4096;
  const RenderOutput a = render_image(field, small_camera(), rc);
  rc.chunk_size = 1;
  const RenderOutput b = render_image(field, small_camera(), rc);
  rc.chunk_size = 7;
  const RenderOutput c = render_image(field, small_camera(), rc);
  EXPECT_EQ(a.rgb.data, b.rgb.data);
  EXPECT_EQ(a.rgb.data, c.rgb.data);
  EXPECT_EQ(a.accumulation.data, b.accumulation.data);
  EXPECT_EQ(a.depth.data, b.depth.data);
  EXPECT_GE(a.render_seconds, 0.0);
}

TEST(RenderImage, OutputsWithinRange) {
  FieldConfig c = small_field_config();
  c.init_scale = 3.0;
  RadianceField field(c, 7);
  RenderConfig rc;
  rc.n_samples = 32;
  const RenderOutput out = render_image(field, small_camera(), rc);
  for (double v : out.rgb.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (double v : out.accumulation.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

double logit(double p) { return std::log(p / (1.0 - p)); }

TEST(RenderImage, OpaqueSlabMatchesRayTracer) {
  const Vec3 half(0.3, 1.0, 1.0);
  const Vec3 albedo(0.8, 0.3, 0.2);
  FieldConfig c;
  c.resolution = {31, 31, 31};  // node spacing 0.1 over [-1.5, 1.5]
  c.density_rank = 1;
  c.appearance_rank = 1;
  c.appearance_channels = 2;
  c.hidden_width = 4;
  c.view_frequencies = 0;
  RadianceField field(c, 8);
  FactorizedGrid& g = field.density_grid();
  for (Param* p : g.factor_parameters()) std::fill(p->value.begin(), p->value.end(), 0.0);
  auto node = [](int i) { return -1.5 + 0.1 * i; };
  auto inside = [](double v, double h) { return std::abs(v) <= h + 1e-9; };
  for (int i = 0; i < 31; ++i)
    for (int j = 0; j < 31; ++j)
      if (inside(node(i), half.x()) && inside(node(j), half.y())) g.planes[0].value[i * 31 + j] = 30.0;
  for (int k = 0; k < 31; ++k)
    if (inside(node(k), half.z())) g.lines[0].value[k] = 1.0;
  for (Param* p : {&field.color_w1(), &field.color_b1(), &field.color_w2()})
    std::fill(p->value.begin(), p->value.end(), 0.0);
  for (int k = 0; k < 3; ++k) field.color_b2().value[k] = logit(albedo[k]);

  ToySceneSpec spec;
  spec.ambient = 1.0;
  spec.diffuse = 0.0;
  spec.supersample = 1;
  Primitive slab;
  slab.kind = Primitive::Kind::Box;
  slab.half_extent = half;
  slab.albedo = albedo;
  spec.primitives = {slab};
  const ToyOracle oracle(spec);
  ToySceneSpec inner_spec = spec, outer_spec = spec;
  inner_spec.primitives[0].half_extent = half - Vec3::Constant(0.15);
  outer_spec.primitives[0].half_extent = half + Vec3::Constant(0.15);
  const ToyOracle inner(inner_spec), outer(outer_spec);

  const CameraModel cam =
      CameraModel::centered(40, 40, 45.0, look_at(Vec3(3.5, 1.2, 1.5), Vec3::Zero(), Vec3::UnitZ()), 2.0, 6.0);
  RenderConfig rc;
  rc.n_samples = 512;
  const RenderOutput out = render_image(field, cam, rc);
  const Image truth = oracle.render(cam);
  const RayBundle rays = generate_rays(cam);
  int hits = 0, misses = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * cam.width + x;
      const bool sure_hit = inner.trace(rays.origins[k], rays.directions[k]) != spec.background;
      const bool sure_miss = outer.trace(rays.origins[k], rays.directions[k]) == spec.background;
      if (!sure_hit && !sure_miss) continue;
      (sure_hit ? hits : misses) += 1;
      for (int ch = 0; ch < 3; ++ch) EXPECT_LT(std::abs(out.rgb(y, x, ch) - truth(y, x, ch)), 0.02) << x << "," << y;
    }
  EXPECT_GT(hits, 100);
  EXPECT_GT(misses, 100);
}

/// Loss sum_k g_k . rgb_k over a few rays of a 4^3 rank-2 field.
class RenderGradient : public ::testing::Test {
 protected:
  void SetUp() override {
    FieldConfig c;
    c.resolution = {4, 4, 4};
    c.density_rank = 2;
    c.appearance_rank = 2;
    c.appearance_channels = 3;
    c.hidden_width = 5;
    c.view_frequencies = 1;
    c.density_shift = 0.5;
    c.density_scale = 1.0;
    c.density_affine = true;
    c.init_scale = 0.6;
    field = RadianceField(c, 9);
    rays.grid_height = 1;
    rays.grid_width = 2;
    rays.origins = {Vec3(-3.0, 0.1, 0.2), Vec3(0.3, -3.0, -0.4)};
    rays.directions = {Vec3(1.0, 0.05, -0.02).normalized(), Vec3(-0.1, 1.0, 0.08).normalized()};
    rays.near = 1.6;
    rays.far = 4.4;
    config.n_samples = 8;
    config.weight_threshold = 0.0;
    config.background = Vec3(0.9, 0.8, 0.7);
    grad = {Vec3(0.7, -0.3, 0.5), Vec3(-0.2, 0.9, 0.4)};
  }

  double loss() const {
    const RayRenderResult r = render_rays(field, rays, 0, rays.size(), config);
    double s = 0.0;
    for (std::size_t k = 0; k < rays.size(); ++k) s += grad[k].dot(r.rgb[k]);
    return s;
  }

  RadianceField field;
  RayBundle rays;
  RenderConfig config;
  std::vector<Vec3> grad;
};

TEST_F(RenderGradient, EveryParameterMatchesCentralDifferences) {
  field.zero_grad();
  RenderTape tape;
  render_rays(field, rays, 0, rays.size(), config, &tape);
  render_rays_backward(field, tape, grad);
  const double h = 1e-4;
  int checked = 0;
  for (Param* p : field.parameters()) {
    for (std::size_t i = 0; i < p->numel(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = loss();
      p->value[i] = saved - h;
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      if (std::abs(numeric) < 1e-7 && std::abs(p->grad[i]) < 1e-7) continue;
      EXPECT_LT(testing::rel_error(p->grad[i], numeric), 1e-3)
          << p->name << "[" << i << "] analytic " << p->grad[i] << " numeric " << numeric;
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(RenderRays, SplitInvariantWithStratification) {
  RadianceField field(small_field_config(), 10);
  const RayBundle rays = generate_rays(small_camera(8));
  RenderConfig rc;
  rc.n_samples = 16;
  rc.stratified = true;
  rc.seed = 5;
  const RayRenderResult whole = render_rays(field, rays, 0, rays.size(), rc);
  const RayRenderResult tail = render_rays(field, rays, 30, rays.size(), rc);
  for (std::size_t k = 30; k < rays.size(); ++k) EXPECT_EQ(whole.rgb[k], tail.rgb[k - 30]);
}

}  // namespace
}  // namespace nerfsr
