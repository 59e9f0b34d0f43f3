// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nerfsr/image.hpp"

namespace nerfsr {
namespace {

void check_patch_size(int height, int width, int patch_size, int ratio) {
  if (patch_size < 1) throw ConfigError("patch size must be positive");
  if (ratio < 1) throw ConfigError("patch ratio must be positive");
  if (patch_size > height || patch_size > width)
    throw BoundsError("patch size " + std::to_string(patch_size) + " exceeds image " +
                      std::to_string(width) + "x" + std::to_string(height));
  if (patch_size % ratio != 0)
    throw ShapeError("patch size " + std::to_string(patch_size) + " is not divisible by ratio " +
                     std::to_string(ratio));
}

std::vector<int> axis_origins(int extent, int patch) {
  std::vector<int> out;
  for (int o = 0; o + patch <= extent; o += patch) out.push_back(o);
  if (extent % patch != 0) out.push_back(extent - patch);
  return out;
}

// Maps output patch coordinates to source coordinates for one transform.
PatchAffine inverse_affine(double size, const PatchTransform& t) {
  const double c = 0.5 * size;
  const double theta = t.rotation_degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  // s = R^-1 (F q - c) + c with F the optional mirror x -> size - x.
  Eigen::Matrix2d rinv;
  rinv << cs, sn, -sn, cs;
  Eigen::Matrix2d f = Eigen::Matrix2d::Identity();
  Vec2 f_offset(0.0, 0.0);
  if (t.hflip) {
    f(0, 0) = -1.0;
    f_offset.x() = size;
  }
  PatchAffine m;
  m.leftCols<2>() = rinv * f;
  m.col(2) = rinv * (f_offset - Vec2(c, c)) + Vec2(c, c);
  return m;
}

Vec2 apply_affine(const PatchAffine& m, const Vec2& q) {
  return Vec2(m(0, 0) * q.x() + m(0, 1) * q.y() + m(0, 2), m(1, 0) * q.x() + m(1, 1) * q.y() + m(1, 2));
}

RayBundle patch_rays(const CameraModel& camera, const PatchSpec& spec, const PatchAffine* map) {
  const int n = spec.size / spec.ratio;
  std::vector<Vec2> coords;
  coords.reserve(static_cast<std::size_t>(n) * n);
  for (int v = 0; v < n; ++v) {
    for (int u = 0; u < n; ++u) {
      if (!map) {
        coords.emplace_back(spec.col + (u + 0.5) * spec.ratio - 0.5,
                            spec.row + (v + 0.5) * spec.ratio - 0.5);
      } else {
        const Vec2 s = apply_affine(*map, Vec2((u + 0.5) * spec.ratio, (v + 0.5) * spec.ratio));
        coords.emplace_back(spec.col + s.x() - 0.5, spec.row + s.y() - 0.5);
      }
    }
  }
  return generate_rays_at(camera, coords, n, n, map == nullptr);
}

}  // namespace

void PatchSpec::validate(int height, int width) const {
  check_patch_size(height, width, size, ratio);
  if (row < 0 || col < 0 || row + size > height || col + size > width)
    throw BoundsError("patch at (" + std::to_string(row) + ", " + std::to_string(col) + ") of size " +
                      std::to_string(size) + " leaves the " + std::to_string(width) + "x" +
                      std::to_string(height) + " image");
}

std::vector<PatchSpec> grid_patches(int height, int width, int patch_size, int ratio) {
  check_patch_size(height, width, patch_size, ratio);
  std::vector<PatchSpec> out;
  for (int r : axis_origins(height, patch_size))
    for (int c : axis_origins(width, patch_size)) out.push_back({r, c, patch_size, ratio, {}});
  return out;
}

PatchSpec random_patch(int height, int width, int patch_size, Rng& rng, int ratio) {
  check_patch_size(height, width, patch_size, ratio);
  std::uniform_int_distribution<int> rows(0, height - patch_size);
  std::uniform_int_distribution<int> cols(0, width - patch_size);
  PatchSpec spec;
  spec.row = rows(rng);
  spec.col = cols(rng);
  spec.size = patch_size;
  spec.ratio = ratio;
  return spec;
}

PatchPair make_patch_pair(const Image& hr_image, const CameraModel& camera, const PatchSpec& spec) {
  if (hr_image.height != camera.height || hr_image.width != camera.width)
    throw ShapeError("make_patch_pair: image and camera resolutions differ");
  spec.validate(hr_image.height, hr_image.width);
  PatchPair pair;
  pair.spec = spec;
  pair.spec.transform.reset();
  pair.camera = camera;
  pair.hr_target = crop(hr_image, spec.row, spec.col, spec.size, spec.size);
  pair.lr_target = bilinear_downsample(pair.hr_target, spec.ratio);
  pair.lr_rays = patch_rays(camera, spec, nullptr);
  return pair;
}

Image transform_image(const Image& image, const PatchTransform& transform, Image* mask) {
  if (image.height != image.width) throw ShapeError("transform_image expects a square image");
  const int n = image.height;
  Image out(n, n, image.channels);
  if (mask) *mask = Image(n, n, 1);
  const PatchAffine map = inverse_affine(n, transform);
  constexpr double kEps = 1e-9;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 s = apply_affine(map, Vec2(j + 0.5, i + 0.5));
      const double sx = s.x() - 0.5;
      const double sy = s.y() - 0.5;
      if (sx < -kEps || sy < -kEps || sx > n - 1 + kEps || sy > n - 1 + kEps) continue;
      for (int c = 0; c < image.channels; ++c) out(i, j, c) = sample_bilinear(image, sx, sy, c);
      if (mask) (*mask)(i, j, 0) = 1.0;
    }
  }
  return out;
}

PatchPair apply_transform(const PatchPair& pair, const PatchTransform& transform) {
  if (transform.identity()) return pair;
  PatchPair out;
  out.spec = pair.spec;
  out.spec.transform = transform;
  out.camera = pair.camera;
  Image mask;
  out.hr_target = transform_image(pair.hr_target, transform, &mask);
  if (!pair.mask.empty()) {
    // Validity travels with the content.
    const Image moved = transform_image(pair.mask, transform);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
      if (moved.data[i] < 1.0) mask.data[i] = 0.0;
  }
  out.mask = std::move(mask);
  out.lr_target = bilinear_downsample(out.hr_target, pair.spec.ratio);
  const PatchAffine step = inverse_affine(pair.spec.size, transform);
  out.source_map.leftCols<2>() = pair.source_map.leftCols<2>() * step.leftCols<2>();
  out.source_map.col(2) = pair.source_map.leftCols<2>() * step.col(2) + pair.source_map.col(2);
  out.lr_rays = patch_rays(pair.camera, pair.spec, &out.source_map);
  return out;
}

PatchPair augment_pair(const PatchPair& pair, const AugmentParams& params, Rng& rng) {
  if (!(params.max_rotation_deg >= 0.0) || params.max_rotation_deg >= 45.0)
    throw ConfigError("max rotation must lie in [0, 45) degrees");
  if (!(params.hflip_prob >= 0.0 && params.hflip_prob <= 1.0))
    throw ConfigError("hflip probability must lie in [0, 1]");
  PatchTransform t;
  const double u = uniform01(rng);
  t.rotation_degrees = params.max_rotation_deg == 0.0 ? 0.0 : (2.0 * u - 1.0) * params.max_rotation_deg;
  t.hflip = uniform01(rng) < params.hflip_prob;
  return apply_transform(pair, t);
}

}  // namespace nerfsr
