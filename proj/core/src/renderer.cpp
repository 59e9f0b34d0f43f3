// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/renderer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace nerfsr {
namespace {

constexpr double kMaxOpticalDepth = 80.0;

// Fills n sample distances over [t0, t1]; deltas absorb both end gaps.
void place_samples(double t0, double t1, int n, bool stratified, Rng* rng, double* t, double* delta) {
  const double bin = (t1 - t0) / n;
  for (int i = 0; i < n; ++i) {
    const double u = stratified ? uniform01(*rng) : 0.5;
    t[i] = t0 + (i + u) * bin;
  }
  for (int i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = (t1 - t[n - 1]) + (t[0] - t0);
}

}  // namespace

RaySamples sample_points(const RayBundle& rays, int n_samples, bool stratified, Rng& rng) {
  if (n_samples < 1) throw ConfigError("sample_points needs at least one sample per ray");
  if (!(rays.near < rays.far)) throw ConfigError("sample_points needs near < far");
  RaySamples out;
  out.ray_count = rays.size();
  out.samples_per_ray = n_samples;
  const std::size_t total = out.ray_count * n_samples;
  out.t.resize(total);
  out.deltas.resize(total);
  out.positions.resize(total);
  for (std::size_t k = 0; k < out.ray_count; ++k) {
    const std::size_t base = k * n_samples;
    place_samples(rays.near, rays.far, n_samples, stratified, &rng, &out.t[base], &out.deltas[base]);
    for (int i = 0; i < n_samples; ++i)
      out.positions[base + i] = rays.origins[k] + out.t[base + i] * rays.directions[k];
  }
  return out;
}

CompositeResult composite(std::span<const double> sigmas, std::span<const Vec3> colors,
                          std::span<const double> deltas, int n_samples, const Vec3& background) {
  if (n_samples < 1) throw ConfigError("composite needs at least one sample per ray");
  if (sigmas.size() != deltas.size() || sigmas.size() != colors.size() ||
      sigmas.size() % n_samples != 0)
    throw ShapeError("composite: sigma, colour and delta arrays disagree in shape");
  const std::size_t m = sigmas.size() / n_samples;
  CompositeResult out;
  out.colors.resize(m);
  out.weights.resize(sigmas.size());
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t base = k * n_samples;
    double log_t = 0.0;
    Vec3 acc = Vec3::Zero();
    double total = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const double s = sigmas[base + i];
      const double d = deltas[base + i];
      if (!(s >= 0.0) || !(d >= 0.0)) throw NumericError("composite: negative or NaN sigma/delta");
      const double x = std::min(s * d, kMaxOpticalDepth);
      const double w = std::exp(log_t) * -std::expm1(-x);
      out.weights[base + i] = w;
      acc += w * colors[base + i];
      total += w;
      log_t -= x;
    }
    out.colors[k] = acc + (1.0 - total) * background;
  }
  return out;
}

RayRenderResult render_rays(const RadianceField& field, const RayBundle& rays, std::size_t begin,
                            std::size_t end, const RenderConfig& config, RenderTape* tape) {
  if (config.n_samples < 1) throw ConfigError("render needs at least one sample per ray");
  if (end > rays.size() || begin > end) throw BoundsError("render_rays: ray range out of bounds");
  const std::size_t m = end - begin;
  const int n = config.n_samples;
  const double thr = config.weight_threshold;
  const Aabb& box = field.box();

  RenderTape local;
  RenderTape& tp = tape ? *tape : local;
  tp.ray_offset.assign(1, 0);
  tp.ray_offset.reserve(m + 1);
  tp.samples.clear();
  tp.final_transmittance.assign(m, 1.0);
  tp.color_positions.clear();
  tp.color_directions.clear();
  tp.background = config.background;

  std::vector<double> t(n), delta(n);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t ray = begin + k;
    const Vec3& o = rays.origins[ray];
    const Vec3& d = rays.directions[ray];
    const auto hit = intersect_box(o, d, box.lo, box.hi, rays.near, rays.far);
    if (hit) {
      Rng rng(derive_seed(config.seed, ray));
      place_samples(hit->first, hit->second, n, config.stratified, &rng, t.data(), delta.data());
      double transmittance = 1.0;
      for (int i = 0; i < n; ++i) {
        RenderTape::Sample s;
        s.position = o + t[i] * d;
        s.t = t[i];
        s.delta = delta[i];
        s.in_box = box.contains(s.position);
        const double sigma = s.in_box ? field.density(s.position, &s.preactivation) : 0.0;
        const double raw = sigma * s.delta;
        s.clamped = raw > kMaxOpticalDepth;
        const double x = std::min(raw, kMaxOpticalDepth);
        const double decay = std::exp(-x);
        s.weight = transmittance * -std::expm1(-x);
        transmittance *= decay;
        s.transmittance_next = transmittance;
        if (thr == 0.0 || s.weight > thr) {
          s.color_row = static_cast<int>(tp.color_positions.size());
          tp.color_positions.push_back(s.position);
          tp.color_directions.push_back(d);
        }
        tp.samples.push_back(s);
        if (transmittance < thr) break;
      }
      tp.final_transmittance[k] = transmittance;
    }
    tp.ray_offset.push_back(tp.samples.size());
  }

  field.color_forward(tp.color_positions, tp.color_directions, tp.colors);

  RayRenderResult out;
  out.rgb.resize(m);
  out.accumulation.resize(m);
  out.depth.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    Vec3 acc = Vec3::Zero();
    double depth = 0.0;
    for (std::size_t j = tp.ray_offset[k]; j < tp.ray_offset[k + 1]; ++j) {
      const auto& s = tp.samples[j];
      depth += s.weight * s.t;
      if (s.color_row >= 0)
        acc += s.weight * Vec3(tp.colors.rgb(s.color_row, 0), tp.colors.rgb(s.color_row, 1),
                               tp.colors.rgb(s.color_row, 2));
    }
    const double t_end = tp.final_transmittance[k];
    out.rgb[k] = acc + t_end * config.background;
    out.accumulation[k] = 1.0 - t_end;
    out.depth[k] = depth;
  }
  return out;
}

void render_rays_backward(RadianceField& field, const RenderTape& tape,
                          std::span<const Vec3> grad_rgb) {
  const std::size_t m = tape.final_transmittance.size();
  if (grad_rgb.size() != m) throw ShapeError("render_rays_backward: gradient count mismatch");
  std::vector<double> grad_colors(tape.color_positions.size() * 3, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec3& g = grad_rgb[k];
    // suffix = sum_{j > i, coloured} w_j (c_j . g) + T_end (bg . g)
    double suffix = tape.final_transmittance[k] * tape.background.dot(g);
    for (std::size_t j = tape.ray_offset[k + 1]; j-- > tape.ray_offset[k];) {
      const auto& s = tape.samples[j];
      double e = 0.0;
      if (s.color_row >= 0) {
        const auto row = static_cast<Eigen::Index>(s.color_row);
        e = tape.colors.rgb(row, 0) * g.x() + tape.colors.rgb(row, 1) * g.y() +
            tape.colors.rgb(row, 2) * g.z();
        for (int c = 0; c < 3; ++c) grad_colors[s.color_row * 3 + c] = s.weight * g[c];
      }
      if (s.in_box && !s.clamped) {
        const double grad_sigma = s.delta * (s.transmittance_next * e - suffix);
        field.density_backward(s.position, s.preactivation, grad_sigma);
      }
      suffix += s.weight * e;
    }
  }
  field.color_backward(tape.color_positions, tape.colors, grad_colors);
}

RenderOutput render_image(const RadianceField& field, const CameraModel& camera,
                          const RenderConfig& config) {
  if (config.chunk_size < 1) throw ConfigError("chunk_size must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const RayBundle rays = generate_rays(camera);
  RenderOutput out;
  out.rgb = Image(camera.height, camera.width, 3);
  out.accumulation = Image(camera.height, camera.width, 1);
  out.depth = Image(camera.height, camera.width, 1);
  RenderTape tape;
  for (std::size_t begin = 0; begin < rays.size(); begin += config.chunk_size) {
    const std::size_t end = std::min(rays.size(), begin + static_cast<std::size_t>(config.chunk_size));
    const RayRenderResult r = render_rays(field, rays, begin, end, config, &tape);
    for (std::size_t k = begin; k < end; ++k) {
      for (int c = 0; c < 3; ++c) out.rgb.data[k * 3 + c] = r.rgb[k - begin][c];
      out.accumulation.data[k] = r.accumulation[k - begin];
      out.depth.data[k] = r.depth[k - begin];
    }
  }
  out.render_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace nerfsr
