// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numbers>

#include "nerfsr/data.hpp"

namespace nerfsr {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 random_color(Rng& rng, double lo, double hi) {
  return Vec3(lo + (hi - lo) * uniform01(rng), lo + (hi - lo) * uniform01(rng),
              lo + (hi - lo) * uniform01(rng));
}

Primitive sphere(const Vec3& center, double radius, double period, Rng& rng) {
  Primitive p;
  p.kind = Primitive::Kind::Sphere;
  p.center = center;
  p.radius = radius;
  p.albedo = random_color(rng, 0.45, 0.95);
  p.albedo_alt = random_color(rng, 0.05, 0.45);
  p.checker_period = period;
  return p;
}

Primitive box(const Vec3& center, const Vec3& half, double period, Rng& rng) {
  Primitive p;
  p.kind = Primitive::Kind::Box;
  p.center = center;
  p.half_extent = half;
  p.albedo = random_color(rng, 0.45, 0.95);
  p.albedo_alt = random_color(rng, 0.05, 0.45);
  p.checker_period = period;
  return p;
}

}  // namespace

double Primitive::intersect(const Vec3& o, const Vec3& d, double t_min) const {
  if (kind == Kind::Sphere) {
    const Vec3 oc = o - center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return -1.0;
    const double s = std::sqrt(disc);
    if (-b - s > t_min) return -b - s;
    if (-b + s > t_min) return -b + s;
    return -1.0;
  }
  const auto hit = intersect_box(o, d, center - half_extent, center + half_extent, t_min,
                                 std::numeric_limits<double>::infinity());
  return hit ? hit->first : -1.0;
}

Vec3 Primitive::normal(const Vec3& p) const {
  if (kind == Kind::Sphere) return (p - center).normalized();
  const Vec3 q = (p - center).cwiseQuotient(half_extent);
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(q[a]) > std::abs(q[axis])) axis = a;
  Vec3 n = Vec3::Zero();
  n[axis] = q[axis] >= 0.0 ? 1.0 : -1.0;
  return n;
}

Vec3 Primitive::color(const Vec3& p) const {
  if (checker_period <= 0.0) return albedo;
  const Vec3 q = (p - center) / checker_period;
  const long parity = static_cast<long>(std::floor(q.x())) + static_cast<long>(std::floor(q.y())) +
                      static_cast<long>(std::floor(q.z()));
  return (parity & 1) ? albedo_alt : albedo;
}

ToySceneSpec ToySceneSpec::standard(std::uint64_t seed) {
  ToySceneSpec spec;
  spec.seed = seed;
  Rng rng(derive_seed(seed, 0x70E5CE7E));
  auto jitter = [&rng](double s) {
    return Vec3((2.0 * uniform01(rng) - 1.0) * s, (2.0 * uniform01(rng) - 1.0) * s,
                (2.0 * uniform01(rng) - 1.0) * s);
  };
  spec.primitives.push_back(box(Vec3(0.0, 0.0, -0.85), Vec3(1.05, 1.05, 0.1), 0.3, rng));
  spec.primitives.push_back(sphere(Vec3(0.0, 0.0, 0.05) + jitter(0.05), 0.55, 0.22, rng));
  spec.primitives.push_back(box(Vec3(0.6, -0.55, -0.45) + jitter(0.05), Vec3(0.28, 0.28, 0.3), 0.19, rng));
  spec.primitives.push_back(sphere(Vec3(-0.6, 0.55, -0.4) + jitter(0.05), 0.33, 0.16, rng));
  spec.primitives.push_back(box(Vec3(-0.55, -0.6, -0.55) + jitter(0.05), Vec3(0.2, 0.2, 0.2), 0.0, rng));
  return spec;
}

void ToySceneSpec::validate() const {
  for (const auto& p : primitives) {
    if (p.kind == Primitive::Kind::Sphere && !(p.radius > 0.0))
      throw ConfigError("toy scene sphere radius must be > 0");
    if (p.kind == Primitive::Kind::Box && !(p.half_extent.minCoeff() > 0.0))
      throw ConfigError("toy scene box extents must be > 0");
  }
  if (width < 1 || height < 1) throw ConfigError("toy scene image size must be positive");
  if (supersample < 1) throw ConfigError("toy scene supersampling must be >= 1");
  if (n_train < 0 || n_test < 0 || n_val < 0) throw ConfigError("negative toy split size");
  if (!(ring_radius > 0.0)) throw ConfigError("toy camera ring radius must be > 0");
}

ToyOracle::ToyOracle(ToySceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  spec_.light_direction.normalize();
}

Vec3 ToyOracle::trace(const Vec3& origin, const Vec3& direction) const {
  double best = std::numeric_limits<double>::infinity();
  const Primitive* hit = nullptr;
  for (const auto& p : spec_.primitives) {
    const double t = p.intersect(origin, direction, 1e-9);
    if (t > 0.0 && t < best) {
      best = t;
      hit = &p;
    }
  }
  if (!hit) return spec_.background;
  const Vec3 x = origin + best * direction;
  const double lambert = std::max(0.0, hit->normal(x).dot(spec_.light_direction));
  return (hit->color(x) * (spec_.ambient + spec_.diffuse * lambert)).cwiseMin(1.0);
}

Image ToyOracle::render(const CameraModel& camera) const {
  const int s = spec_.supersample;
  std::vector<Vec2> coords;
  coords.reserve(static_cast<std::size_t>(camera.width) * camera.height * s * s);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x)
      for (int sy = 0; sy < s; ++sy)
        for (int sx = 0; sx < s; ++sx)
          coords.emplace_back(x + (sx + 0.5) / s - 0.5, y + (sy + 0.5) / s - 0.5);
  CameraModel world = camera;
  world.ndc = false;
  const RayBundle rays = generate_rays_at(world, coords, 1, static_cast<int>(coords.size()));
  Image out(camera.height, camera.width, 3);
  const double inv = 1.0 / (s * s);
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    Vec3 acc = Vec3::Zero();
    for (int k = 0; k < s * s; ++k) {
      const std::size_t r = p * s * s + k;
      acc += trace(rays.origins[r], rays.directions[r]);
    }
    acc *= inv;
    for (int c = 0; c < 3; ++c) out.data[p * 3 + c] = acc[c];
  }
  return out;
}

CameraModel ToyOracle::ring_camera(double azimuth_deg, double elevation_deg) const {
  const double az = azimuth_deg * kDeg;
  const double el = elevation_deg * kDeg;
  const Vec3 eye = spec_.ring_radius *
                   Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const double focal = 0.5 * spec_.width / std::tan(0.5 * spec_.camera_angle_x);
  CameraModel cam = CameraModel::centered(spec_.width, spec_.height, focal,
                                          look_at(eye, Vec3::Zero(), Vec3::UnitZ()));
  cam.near = 2.0;
  cam.far = 6.0;
  return cam;
}

ToyScene generate_toy_scene(const ToySceneSpec& spec) {
  auto oracle = std::make_shared<const ToyOracle>(spec);
  ToyScene scene;
  scene.oracle = oracle;
  SceneDataset& ds = scene.dataset;
  ds.kind = DatasetKind::Toy;
  ds.name = "toy-" + std::to_string(spec.seed);
  ds.background = spec.background;
  auto add = [&](std::vector<View>& split, const std::string& prefix, int count, double az0,
                 int index) {
    // Alternating elevations cover the upper hemisphere band.
    const double el = spec.elevation_deg + ((index % 2 == 0) ? -10.0 : 10.0);
    const double az = az0 + 360.0 * index / std::max(count, 1);
    View v;
    v.name = prefix + "_" + std::to_string(index);
    v.camera = oracle->ring_camera(az, el);
    v.image = oracle->render(v.camera);
    split.push_back(std::move(v));
  };
  for (int i = 0; i < spec.n_train; ++i) add(ds.train, "r", spec.n_train, 0.0, i);
  for (int i = 0; i < spec.n_test; ++i) add(ds.test, "r", spec.n_test, 360.0 / (2.0 * std::max(spec.n_train, 1)) + 7.0, i);
  for (int i = 0; i < spec.n_val; ++i) add(ds.val, "r", spec.n_val, 101.0, i);
  return scene;
}

}  // namespace nerfsr
