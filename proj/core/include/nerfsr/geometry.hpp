// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nerfsr/common.hpp"

namespace nerfsr {

/// Pinhole camera. Image-plane coordinates are continuous: pixel (i, j) covers
/// [i, i + 1) x [j, j + 1) and its ray passes through (i + 0.5, j + 0.5).
/// The principal point is expressed in the same continuous coordinates, so a
/// centred camera has principal = (W / 2, H / 2).
///
/// Camera axes are right-handed with the camera looking down -z and +y up;
/// `pose` maps camera coordinates to world coordinates.
struct CameraModel {
  int width = 0;
  int height = 0;
  double focal_x = 0.0;
  double focal_y = 0.0;
  double principal_x = 0.0;
  double principal_y = 0.0;
  Mat4 pose = Mat4::Identity();
  double near = 2.0;
  double far = 6.0;
  /// Emit rays in normalized device coordinates (forward-facing scenes).
  bool ndc = false;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  Vec3 origin() const { return pose.block<3, 1>(0, 3); }
  Mat3 rotation() const { return pose.block<3, 3>(0, 0); }

  static CameraModel centered(int width, int height, double focal, const Mat4& pose,
                              double near = 2.0, double far = 6.0);
};

/// Rays laid out on a grid_height x grid_width lattice (row-major).
struct RayBundle {
  int grid_height = 0;
  int grid_width = 0;
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
  double near = 0.0;
  double far = 1.0;

  std::size_t size() const { return origins.size(); }
};

/// Integer pixel window [col, col + cols) x [row, row + rows).
struct PixelWindow {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
};

/// One ray per pixel of the full image.
RayBundle generate_rays(const CameraModel& camera);

/// One ray per pixel of a sub-window; throws BoundsError if the window leaves
/// the image.
RayBundle generate_rays(const CameraModel& camera, const PixelWindow& window);

/// Rays through continuous pixel-index coordinates (pixel i centred at i,
/// i.e. image-plane coordinate i + 0.5). Coordinates must lie inside
/// [-0.5, W - 0.5] x [-0.5, H - 0.5]. The bundle is laid out as
/// grid_height x grid_width and `coords.size()` must match. With
/// check_bounds false, coordinates beyond the image edge are allowed.
RayBundle generate_rays_at(const CameraModel& camera, std::span<const Vec2> coords,
                           int grid_height, int grid_width, bool check_bounds = true);

/// Camera for the same view at 1/ratio resolution. Width, height and focal
/// lengths are divided by ratio; the continuous principal point likewise,
/// which keeps pixel centres aligned: LR pixel u sees HR pixel-index
/// coordinate (u + 0.5) * ratio - 0.5.
CameraModel downscale_camera(const CameraModel& camera, int ratio);

/// Forward-facing NDC warp of world rays onto the near plane (z = -near_plane).
void to_ndc(const CameraModel& camera, double near_plane, std::vector<Vec3>& origins,
            std::vector<Vec3>& directions);

/// Ray-AABB slab intersection. Returns the parametric interval clipped to
/// [t_min, t_max], or nullopt when the ray misses.
std::optional<std::pair<double, double>> intersect_box(const Vec3& origin, const Vec3& direction,
                                                       const Vec3& lo, const Vec3& hi,
                                                       double t_min, double t_max);

/// Right-handed look-at pose (camera -z toward `target`).
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

/// Interpolates two poses: rotation by quaternion slerp, translation linearly.
Mat4 interpolate_pose(const Mat4& a, const Mat4& b, double t);

}  // namespace nerfsr
