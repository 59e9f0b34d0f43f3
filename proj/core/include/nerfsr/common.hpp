// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nerfsr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Doubles aligned for the widest vector unit, so vectorized loops split
/// into the same head and body on every run.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index or coordinate outside the valid domain.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Array shapes or resolutions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite inputs or a diverged optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller, one value per two uniforms).
double normal01(Rng& rng);

/// A learnable array together with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<std::int64_t> shape;
  Buffer value;
  Buffer grad;

  Param() = default;
  Param(std::string n, std::vector<std::int64_t> s);

  std::size_t numel() const { return value.size(); }
  void zero_grad();
};

std::size_t shape_numel(const std::vector<std::int64_t>& shape);
std::string shape_string(const std::vector<std::int64_t>& shape);

/// Height x width x channels image of doubles, row-major, interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  Buffer data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& operator()(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double operator()(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool empty() const { return data.empty(); }
};

bool all_finite(std::span<const double> values);

/// 64-bit FNV-1a over the raw bytes; used for fingerprints and checksums.
std::uint64_t fnv1a(const void* bytes, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t checksum(std::span<const double> values, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace nerfsr
