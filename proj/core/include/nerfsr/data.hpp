// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "nerfsr/common.hpp"
#include "nerfsr/field.hpp"
#include "nerfsr/geometry.hpp"

namespace nerfsr {

enum class DatasetKind { Blender, LLFF, Toy };

std::string to_string(DatasetKind kind);

struct View {
  std::string name;
  Image image;  // H x W x 3 in [0, 1]
  CameraModel camera;
};

struct SceneDataset {
  DatasetKind kind = DatasetKind::Toy;
  std::string name;
  std::vector<View> train;
  std::vector<View> val;
  std::vector<View> test;
  Vec3 background = Vec3::Ones();
  Aabb box;

  /// Hash of every pose, intrinsic and image checksum.
  std::uint64_t fingerprint() const;
  /// Checks the split invariants (shared resolution, valid cameras).
  void validate() const;
};

/// Blender-style synthetic scene: transforms_{train,val,test}.json plus
/// images. RGBA images are composited onto `background`; val may be absent.
SceneDataset load_blender(const std::filesystem::path& root, const Vec3& background = Vec3::Ones(),
                          double near = 2.0, double far = 6.0);

/// Writes a dataset in the Blender layout (8-bit PNG, camera_angle_x from
/// the first camera's focal length).
void write_blender_dataset(const SceneDataset& dataset, const std::filesystem::path& root);

struct LlffOptions {
  int downsample = 4;
  bool ndc = true;
  /// Bounds scaling so the nearest depth lands at 1 / bd_factor.
  double bd_factor = 0.75;
  bool recenter = true;
};

/// Forward-facing scene: poses_bounds.npy (N x 17) plus images_{factor}/
/// (or images/, downsampled on load). Every 8th view goes to test.
SceneDataset load_llff(const std::filesystem::path& root, const LlffOptions& options = {});

/// Converts one LLFF pose (columns down, right, backwards) to the
/// right-up-backwards camera-to-world convention.
Mat4 llff_pose_to_camera(const Eigen::Matrix<double, 3, 4>& pose);

/// Bilinearly downsampled images with matching downscaled cameras.
SceneDataset downsample_dataset(const SceneDataset& dataset, int ratio);

// ---------------------------------------------------------------------------
// Procedural toy scene with an analytic ray tracer.

struct Primitive {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 0.5;                          // sphere
  Vec3 half_extent = Vec3::Constant(0.5);       // box
  Vec3 albedo = Vec3::Constant(0.8);
  Vec3 albedo_alt = Vec3::Constant(0.2);        // second checker colour
  double checker_period = 0.0;                  // 0 disables the texture

  /// Closest hit distance along a unit ray beyond t_min, or a negative value.
  double intersect(const Vec3& origin, const Vec3& direction, double t_min) const;
  Vec3 normal(const Vec3& point) const;
  Vec3 color(const Vec3& point) const;
};

struct ToySceneSpec {
  std::vector<Primitive> primitives;
  Vec3 light_direction = Vec3(0.4, 0.8, 0.45);  // towards the light
  double ambient = 0.35;
  double diffuse = 0.65;
  Vec3 background = Vec3::Ones();
  int width = 200;
  int height = 200;
  double camera_angle_x = 0.6911112070083618;
  int n_train = 20;
  int n_test = 5;
  int n_val = 1;
  double ring_radius = 4.0;
  double elevation_deg = 30.0;
  /// Sub-pixel samples per axis (anti-aliasing).
  int supersample = 2;
  std::uint64_t seed = 0;

  /// Spheres and boxes with checker textures, placed from `seed`.
  static ToySceneSpec standard(std::uint64_t seed = 0);
  void validate() const;
};

/// Brute-force ray tracer for a ToySceneSpec: analytic intersections,
/// Lambert shading with an ambient term, exact background.
class ToyOracle {
 public:
  explicit ToyOracle(ToySceneSpec spec);

  const ToySceneSpec& spec() const { return spec_; }
  /// Radiance along one ray (unit direction).
  Vec3 trace(const Vec3& origin, const Vec3& direction) const;
  /// Supersampled image for any camera.
  Image render(const CameraModel& camera) const;
  /// Camera on the ring at the given azimuth and elevation (degrees).
  CameraModel ring_camera(double azimuth_deg, double elevation_deg) const;

 private:
  ToySceneSpec spec_;
};

struct ToyScene {
  SceneDataset dataset;
  std::shared_ptr<const ToyOracle> oracle;
};

ToyScene generate_toy_scene(const ToySceneSpec& spec);

}  // namespace nerfsr
