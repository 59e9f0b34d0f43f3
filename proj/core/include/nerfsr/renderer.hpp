// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nerfsr/common.hpp"
#include "nerfsr/field.hpp"
#include "nerfsr/geometry.hpp"

namespace nerfsr {

/// Sample positions along a batch of rays, ray-major ([M, N]).
struct RaySamples {
  std::size_t ray_count = 0;
  int samples_per_ray = 0;
  std::vector<double> t;
  std::vector<double> deltas;
  std::vector<Vec3> positions;
};

/// N samples per ray over the bundle's [near, far]. Without stratification
/// the samples sit at bin midpoints; with it, one uniform draw per bin.
/// The last spacing absorbs both end gaps so that the deltas of a ray sum to
/// far - near.
RaySamples sample_points(const RayBundle& rays, int n_samples, bool stratified, Rng& rng);

struct CompositeResult {
  std::vector<Vec3> colors;     // [M]
  std::vector<double> weights;  // [M, N]
};

/// Alpha compositing of N samples per ray over a background colour.
/// Transmittances are accumulated in log space with sigma * delta clamped to 80.
CompositeResult composite(std::span<const double> sigmas, std::span<const Vec3> colors,
                          std::span<const double> deltas, int n_samples, const Vec3& background);

struct RenderConfig {
  int n_samples = 128;
  bool stratified = false;
  Vec3 background = Vec3::Ones();
  int chunk_size = 4096;
  /// Samples with weight at or below this skip colour evaluation, and a ray
  /// stops once its transmittance drops below it. 0 disables both.
  double weight_threshold = 1e-4;
  std::uint64_t seed = 0;
};

struct RenderOutput {
  Image rgb;           // H x W x 3
  Image accumulation;  // H x W x 1
  Image depth;         // H x W x 1, expected t
  double render_seconds = 0.0;
};

/// Renders every pixel of `camera`. Output is identical for any chunk_size.
RenderOutput render_image(const RadianceField& field, const CameraModel& camera,
                          const RenderConfig& config);

/// Everything the backward pass needs from one batched forward render.
struct RenderTape {
  struct Sample {
    Vec3 position;
    double preactivation = 0.0;
    double delta = 0.0;
    double t = 0.0;
    double weight = 0.0;
    double transmittance_next = 0.0;  // T_{i+1}
    int color_row = -1;               // row in the colour tape, -1 when skipped
    bool in_box = false;
    bool clamped = false;
  };
  std::vector<std::size_t> ray_offset;  // [M + 1] into samples
  std::vector<Sample> samples;
  std::vector<double> final_transmittance;  // [M]
  std::vector<Vec3> color_positions;
  std::vector<Vec3> color_directions;
  RadianceField::ColorTape colors;
  Vec3 background = Vec3::Ones();
};

struct RayRenderResult {
  std::vector<Vec3> rgb;
  std::vector<double> accumulation;
  std::vector<double> depth;
};

/// Renders rays [begin, end) of `rays`. Stratified jitter for ray k is drawn
/// from a stream seeded by (config.seed, k), so results do not depend on
/// how the bundle is split. When `tape` is non-null it is filled for
/// render_rays_backward().
RayRenderResult render_rays(const RadianceField& field, const RayBundle& rays, std::size_t begin,
                            std::size_t end, const RenderConfig& config, RenderTape* tape = nullptr);

/// Accumulates d(loss)/d(field parameters) given d(loss)/d(rgb) per ray.
void render_rays_backward(RadianceField& field, const RenderTape& tape,
                          std::span<const Vec3> grad_rgb);

}  // namespace nerfsr
