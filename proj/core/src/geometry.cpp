// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <string>

namespace nerfsr {
namespace {

constexpr double kRotationTolerance = 1e-5;

Vec3 camera_direction(const CameraModel& cam, double px, double py) {
  // px, py are pixel-index coordinates; the ray passes through px + 0.5.
  return Vec3((px + 0.5 - cam.principal_x) / cam.focal_x,
              -(py + 0.5 - cam.principal_y) / cam.focal_y, -1.0);
}

RayBundle make_bundle(const CameraModel& camera, int rows, int cols) {
  RayBundle bundle;
  bundle.grid_height = rows;
  bundle.grid_width = cols;
  bundle.origins.resize(static_cast<std::size_t>(rows) * cols);
  bundle.directions.resize(bundle.origins.size());
  bundle.near = camera.near;
  bundle.far = camera.far;
  return bundle;
}

void finish_bundle(const CameraModel& camera, RayBundle& bundle) {
  if (camera.ndc) {
    to_ndc(camera, 1.0, bundle.origins, bundle.directions);
    bundle.near = 0.0;
    bundle.far = 1.0;
  }
}

}  // namespace

void CameraModel::validate() const {
  if (width <= 0 || height <= 0)
    throw ConfigError("camera resolution must be positive, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw ConfigError("camera focal lengths must be > 0");
  if (!(near > 0.0) || !(near < far))
    throw ConfigError("camera bounds must satisfy 0 < near < far (near=" + std::to_string(near) +
                      ", far=" + std::to_string(far) + ")");
  const Mat3 r = rotation();
  if (!pose.allFinite()) throw ConfigError("camera pose has non-finite entries");
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > kRotationTolerance || std::abs(r.determinant() - 1.0) > kRotationTolerance)
    throw ConfigError("camera pose rotation block is not a proper rotation");
}

CameraModel CameraModel::centered(int width, int height, double focal, const Mat4& pose,
                                  double near, double far) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.focal_x = focal;
  cam.focal_y = focal;
  cam.principal_x = 0.5 * width;
  cam.principal_y = 0.5 * height;
  cam.pose = pose;
  cam.near = near;
  cam.far = far;
  return cam;
}

RayBundle generate_rays(const CameraModel& camera) {
  return generate_rays(camera, PixelWindow{0, 0, camera.height, camera.width});
}

RayBundle generate_rays(const CameraModel& camera, const PixelWindow& window) {
  camera.validate();
  if (window.row < 0 || window.col < 0 || window.rows < 0 || window.cols < 0 ||
      window.row + window.rows > camera.height || window.col + window.cols > camera.width)
    throw BoundsError("pixel window [" + std::to_string(window.col) + "," +
                      std::to_string(window.col + window.cols) + ")x[" +
                      std::to_string(window.row) + "," + std::to_string(window.row + window.rows) +
                      ") outside " + std::to_string(camera.width) + "x" +
                      std::to_string(camera.height) + " image");
  RayBundle bundle = make_bundle(camera, window.rows, window.cols);
  const Mat3 rot = camera.rotation();
  const Vec3 origin = camera.origin();
  std::size_t k = 0;
  for (int y = 0; y < window.rows; ++y) {
    for (int x = 0; x < window.cols; ++x, ++k) {
      bundle.origins[k] = origin;
      bundle.directions[k] = (rot * camera_direction(camera, window.col + x, window.row + y))
                                 .normalized();
    }
  }
  finish_bundle(camera, bundle);
  return bundle;
}

RayBundle generate_rays_at(const CameraModel& camera, std::span<const Vec2> coords,
                           int grid_height, int grid_width, bool check_bounds) {
  camera.validate();
  if (static_cast<std::size_t>(grid_height) * grid_width != coords.size())
    throw ShapeError("generate_rays_at: coordinate count does not match grid shape");
  RayBundle bundle = make_bundle(camera, grid_height, grid_width);
  const Mat3 rot = camera.rotation();
  const Vec3 origin = camera.origin();
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const double px = coords[k].x();
    const double py = coords[k].y();
    if (check_bounds && !(px >= -0.5 && px <= camera.width - 0.5 && py >= -0.5 && py <= camera.height - 0.5))
      throw BoundsError("pixel coordinate (" + std::to_string(px) + ", " + std::to_string(py) +
                        ") outside " + std::to_string(camera.width) + "x" +
                        std::to_string(camera.height) + " image");
    bundle.origins[k] = origin;
    bundle.directions[k] = (rot * camera_direction(camera, px, py)).normalized();
  }
  finish_bundle(camera, bundle);
  return bundle;
}

CameraModel downscale_camera(const CameraModel& camera, int ratio) {
  if (ratio < 1) throw ConfigError("downscale ratio must be a positive integer");
  if (camera.width % ratio != 0 || camera.height % ratio != 0)
    throw ShapeError("camera resolution " + std::to_string(camera.width) + "x" +
                     std::to_string(camera.height) + " is not divisible by ratio " +
                     std::to_string(ratio));
  if (ratio == 1) return camera;
  CameraModel out = camera;
  const double inv = 1.0 / ratio;
  out.width = camera.width / ratio;
  out.height = camera.height / ratio;
  out.focal_x = camera.focal_x * inv;
  out.focal_y = camera.focal_y * inv;
  out.principal_x = camera.principal_x * inv;
  out.principal_y = camera.principal_y * inv;
  return out;
}

void to_ndc(const CameraModel& camera, double near_plane, std::vector<Vec3>& origins,
            std::vector<Vec3>& directions) {
  const double sx = 2.0 * camera.focal_x / camera.width;
  const double sy = 2.0 * camera.focal_y / camera.height;
  for (std::size_t k = 0; k < origins.size(); ++k) {
    Vec3 o = origins[k];
    const Vec3& d = directions[k];
    const double t = -(near_plane + o.z()) / d.z();
    o += t * d;
    const Vec3 o_ndc(-sx * o.x() / o.z(), -sy * o.y() / o.z(), 1.0 + 2.0 * near_plane / o.z());
    const Vec3 d_ndc(-sx * (d.x() / d.z() - o.x() / o.z()), -sy * (d.y() / d.z() - o.y() / o.z()),
                     -2.0 * near_plane / o.z());
    origins[k] = o_ndc;
    directions[k] = d_ndc;
  }
}

std::optional<std::pair<double, double>> intersect_box(const Vec3& origin, const Vec3& direction,
                                                       const Vec3& lo, const Vec3& hi,
                                                       double t_min, double t_max) {
  double t0 = t_min;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    const double d = direction[a];
    if (std::abs(d) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - origin[a]) / d;
    double tb = (hi[a] - origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  return std::make_pair(t0, t1);
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 back = (eye - target).normalized();
  Vec3 right = up.cross(back);
  if (right.norm() < 1e-12) right = Vec3(1.0, 0.0, 0.0).cross(back);
  right.normalize();
  const Vec3 cam_up = back.cross(right);
  Mat4 pose = Mat4::Identity();
  pose.block<3, 1>(0, 0) = right;
  pose.block<3, 1>(0, 1) = cam_up;
  pose.block<3, 1>(0, 2) = back;
  pose.block<3, 1>(0, 3) = eye;
  return pose;
}

Mat4 interpolate_pose(const Mat4& a, const Mat4& b, double t) {
  const Eigen::Quaterniond qa(Mat3(a.block<3, 3>(0, 0)));
  const Eigen::Quaterniond qb(Mat3(b.block<3, 3>(0, 0)));
  Mat4 out = Mat4::Identity();
  out.block<3, 3>(0, 0) = qa.slerp(t, qb).normalized().toRotationMatrix();
  out.block<3, 1>(0, 3) = (1.0 - t) * a.block<3, 1>(0, 3) + t * b.block<3, 1>(0, 3);
  return out;
}

}  // namespace nerfsr
