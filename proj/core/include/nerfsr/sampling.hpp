// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "nerfsr/common.hpp"
#include "nerfsr/geometry.hpp"

namespace nerfsr {

/// Image-plane transform of a patch about its centre: rotate, then mirror
/// horizontally.
struct PatchTransform {
  double rotation_degrees = 0.0;
  bool hflip = false;

  bool identity() const { return rotation_degrees == 0.0 && !hflip; }
};

struct PatchSpec {
  int row = 0;
  int col = 0;
  int size = 0;
  int ratio = 1;
  std::optional<PatchTransform> transform;

  /// Throws BoundsError / ShapeError if the patch does not fit an H x W image.
  void validate(int height, int width) const;
};

/// Affine map from transformed patch coordinates to original ones
/// (patch-local, continuous, origin at the patch corner).
using PatchAffine = Eigen::Matrix<double, 2, 3>;

struct PatchPair {
  RayBundle lr_rays;    // [P/r, P/r]
  Image hr_target;      // P x P x 3
  Image lr_target;      // P/r x P/r x 3
  Image mask;           // P x P x 1; empty means every pixel is valid
  CameraModel camera;   // HR camera the rays were generated from
  PatchSpec spec;
  PatchAffine source_map = PatchAffine::Identity();
};

/// Tiles an H x W image with P x P patches in row-major order. When a side
/// is not a multiple of P the last patch on that axis is anchored at
/// side - P, so the union still covers every pixel.
std::vector<PatchSpec> grid_patches(int height, int width, int patch_size, int ratio = 1);

/// Patch with origin uniform over [0, H - P] x [0, W - P].
PatchSpec random_patch(int height, int width, int patch_size, Rng& rng, int ratio = 1);

/// LR rays through the HR pixel-index coordinates
/// origin + ((u + 0.5) r - 0.5, (v + 0.5) r - 0.5), the exact HR crop and
/// its bilinear downsample.
PatchPair make_patch_pair(const Image& hr_image, const CameraModel& camera, const PatchSpec& spec);

struct AugmentParams {
  double max_rotation_deg = 10.0;
  double hflip_prob = 0.1;
};

/// Resamples `image` under `transform` about its centre. Output pixels whose
/// source falls outside the input get 0 and mask 0.
Image transform_image(const Image& image, const PatchTransform& transform, Image* mask = nullptr);

/// Applies one transform to both members of a pair: the HR target is
/// resampled bilinearly and the LR rays regenerated through the transformed
/// coordinates. The identity transform returns the pair unchanged.
PatchPair apply_transform(const PatchPair& pair, const PatchTransform& transform);

/// Draws a rotation uniformly in [-max, max] and a flip with hflip_prob, then
/// applies them. Throws ConfigError when max_rotation_deg >= 45.
PatchPair augment_pair(const PatchPair& pair, const AugmentParams& params, Rng& rng);

}  // namespace nerfsr
