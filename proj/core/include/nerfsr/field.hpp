// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nerfsr/checkpoint.hpp"
#include "nerfsr/common.hpp"

namespace nerfsr {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Aabb {
  Vec3 lo = Vec3::Constant(-1.5);
  Vec3 hi = Vec3::Constant(1.5);

  bool contains(const Vec3& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y() &&
           p.z() >= lo.z() && p.z() <= hi.z();
  }
  Vec3 extent() const { return hi - lo; }
};

/// Lower lattice index and interpolation fraction per axis.
struct GridCoords {
  std::array<int, 3> index{};
  std::array<double, 3> frac{};
};

/// Vector-matrix factorization of a 3-D feature grid: three plane factors
/// (XY, XZ, YZ) each paired with a line factor along the remaining axis (Z, Y,
/// X). Component (m, k) at a point is plane_m[k](a, b) * line_m[k](c), both
/// interpolated linearly with lattice nodes on the box corners.
///
/// With channels == 0 the grid emits the plain sum of its 3R components (the
/// density layout); otherwise a bias-free basis matrix [channels, 3R] mixes
/// them into `channels` features.
///
/// Storage is channels-last: plane m has shape [N_a, N_b, R] and line m has
/// shape [N_c, R].
class FactorizedGrid {
 public:
  FactorizedGrid() = default;
  FactorizedGrid(const std::string& prefix, std::array<int, 3> resolution, int rank, int channels,
                 const Aabb& box);

  const std::array<int, 3>& resolution() const { return resolution_; }
  int rank() const { return rank_; }
  int channels() const { return channels_; }
  int component_count() const { return 3 * rank_; }
  const Aabb& box() const { return box_; }

  GridCoords locate(const Vec3& p) const;

  /// Writes the 3R component products for `g` into `out`.
  void components(const GridCoords& g, double* out) const;
  /// Sum of all components (density layout).
  double component_sum(const GridCoords& g) const;

  /// Accumulates d(loss)/d(factors) given d(loss)/d(components).
  void components_backward(const GridCoords& g, const double* grad);
  /// Same, for a gradient shared by every component (sum layout).
  void sum_backward(const GridCoords& g, double grad);

  void init_normal(double scale, Rng& rng);

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  /// Plane and line factors only (excludes the basis matrix).
  std::vector<Param*> factor_parameters();

  std::size_t parameter_count() const;

  /// Same function sampled on a finer lattice (per-axis linear resampling of
  /// every factor with nodes kept on the box corners).
  FactorizedGrid upsampled(std::array<int, 3> resolution) const;

  std::array<Param, 3> planes;
  std::array<Param, 3> lines;
  Param basis;

 private:
  std::array<int, 3> resolution_{2, 2, 2};
  int rank_ = 0;
  int channels_ = 0;
  Aabb box_;
  std::string prefix_;
};

struct FieldConfig {
  Aabb box;
  std::array<int, 3> resolution{64, 64, 64};
  int density_rank = 8;
  int appearance_rank = 24;
  int appearance_channels = 27;
  int hidden_width = 64;
  int view_frequencies = 2;
  /// sigma = density_scale * softplus(F_sigma(feature) + density_shift)
  double density_shift = -10.0;
  double density_scale = 25.0;
  /// Learnable scalar affine F_sigma; identity when false.
  bool density_affine = false;
  double init_scale = 0.1;
};

/// Hybrid radiance field: factorized density and appearance grids with a
/// shifted-softplus density head and a two-layer colour decoder fed with
/// appearance features and a sinusoidal view-direction encoding.
class RadianceField {
 public:
  RadianceField() = default;
  RadianceField(const FieldConfig& config, std::uint64_t seed);

  const FieldConfig& config() const { return config_; }
  const Aabb& box() const { return config_.box; }

  /// Density at each position; exactly 0 outside the bounding box.
  /// Throws NumericError on non-finite input.
  std::vector<double> query_density(std::span<const Vec3> positions) const;

  /// RGB in [0, 1]. Directions must be unit length within 1e-3.
  std::vector<Vec3> query_color(std::span<const Vec3> positions,
                                std::span<const Vec3> directions) const;

  /// Exact byte count of all learnable parameters at float64 precision.
  std::size_t size_bytes() const { return parameter_count() * sizeof(double); }
  std::size_t parameter_count() const;

  /// Copy with grids resampled to `resolution`; throws ShapeError if any axis shrinks.
  RadianceField upsampled(std::array<int, 3> resolution) const;

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  std::vector<Param*> grid_parameters();
  std::vector<Param*> network_parameters();
  void zero_grad();

  void save(Archive& archive, const std::string& prefix = "field.") const;
  static RadianceField load(const Archive& archive, const std::string& prefix = "field.");

  // --- differentiable building blocks used by the renderer ---

  int encoding_width() const { return 3 + 6 * config_.view_frequencies; }
  int decoder_input_width() const { return config_.appearance_channels + encoding_width(); }

  /// Density at one point. `preactivation` receives the softplus argument
  /// (left untouched outside the box, where the density is 0).
  double density(const Vec3& p, double* preactivation = nullptr) const;
  void density_backward(const Vec3& p, double preactivation, double grad_sigma);

  /// Intermediate values kept by color_forward() for color_backward().
  struct ColorTape {
    MatRM components;  // M x 3R
    MatRM inputs;      // M x (C + encoding)
    MatRM hidden;      // M x H, pre-activation
    MatRM rgb;         // M x 3
  };

  void color_forward(std::span<const Vec3> positions, std::span<const Vec3> directions,
                     ColorTape& tape) const;
  /// grad_rgb is M x 3 (row-major); accumulates into every colour-path gradient.
  void color_backward(std::span<const Vec3> positions, const ColorTape& tape,
                      std::span<const double> grad_rgb);

  FactorizedGrid& density_grid() { return density_; }
  FactorizedGrid& appearance_grid() { return appearance_; }
  const FactorizedGrid& density_grid() const { return density_; }
  const FactorizedGrid& appearance_grid() const { return appearance_; }
  Param& color_w1() { return w1_; }
  Param& color_b1() { return b1_; }
  Param& color_w2() { return w2_; }
  Param& color_b2() { return b2_; }
  Param& density_affine() { return affine_; }

 private:
  void encode_direction(const Vec3& d, double* out) const;

  FieldConfig config_;
  FactorizedGrid density_;
  FactorizedGrid appearance_;
  Param affine_;  // [2] = (weight, bias) when config_.density_affine
  Param w1_, b1_, w2_, b2_;
};

double softplus(double x);
double sigmoid(double x);

std::string field_config_json(const FieldConfig& config);
FieldConfig field_config_from_json(const std::string& text);

}  // namespace nerfsr
