// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/field.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace nerfsr {
namespace {

using json = nlohmann::json;

// Plane m spans axes kPlaneAxes[m]; its line runs along kLineAxis[m].
constexpr int kPlaneAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
constexpr int kLineAxis[3] = {2, 1, 0};

void fan_in_uniform(Param& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  for (double& v : p.value) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

// Linear resampling of one axis of a row-major array with nodes on both ends.
Buffer resample_axis(const Buffer& src, const std::vector<int>& dims,
                                  int axis, int new_size) {
  const int old_size = dims[axis];
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  Buffer dst(outer * new_size * inner);
  for (int j = 0; j < new_size; ++j) {
    const double x = new_size == 1 ? 0.0 : j * static_cast<double>(old_size - 1) / (new_size - 1);
    const int i0 = std::min(static_cast<int>(std::floor(x)), std::max(old_size - 2, 0));
    const int i1 = std::min(i0 + 1, old_size - 1);
    const double f = x - i0;
    for (std::size_t o = 0; o < outer; ++o) {
      const double* a = &src[(o * old_size + i0) * inner];
      const double* b = &src[(o * old_size + i1) * inner];
      double* d = &dst[(o * new_size + j) * inner];
      for (std::size_t k = 0; k < inner; ++k) d[k] = f == 0.0 ? a[k] : (1.0 - f) * a[k] + f * b[k];
    }
  }
  return dst;
}

void check_finite(const Vec3& p, const char* what) {
  if (!p.allFinite()) throw NumericError(std::string("non-finite ") + what);
}

}  // namespace

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// FactorizedGrid

FactorizedGrid::FactorizedGrid(const std::string& prefix, std::array<int, 3> resolution, int rank,
                               int channels, const Aabb& box)
    : resolution_(resolution), rank_(rank), channels_(channels), box_(box), prefix_(prefix) {
  for (int n : resolution)
    if (n < 2) throw ShapeError("grid resolution must be >= 2 per axis");
  if (rank < 0 || channels < 0) throw ConfigError("grid rank and channels must be non-negative");
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    planes[m] = Param(prefix + "plane" + std::to_string(m), {resolution[a], resolution[b], rank});
    lines[m] = Param(prefix + "line" + std::to_string(m), {resolution[c], rank});
  }
  if (channels > 0) basis = Param(prefix + "basis", {channels, 3 * rank});
}

GridCoords FactorizedGrid::locate(const Vec3& p) const {
  GridCoords g;
  for (int a = 0; a < 3; ++a) {
    const int n = resolution_[a];
    double x = (p[a] - box_.lo[a]) / (box_.hi[a] - box_.lo[a]) * (n - 1);
    x = std::clamp(x, 0.0, static_cast<double>(n - 1));
    const int i0 = std::min(static_cast<int>(x), n - 2);
    g.index[a] = i0;
    g.frac[a] = x - i0;
  }
  return g;
}

void FactorizedGrid::components(const GridCoords& g, double* out) const {
  const int r = rank_;
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    const int nb = resolution_[b];
    const double fa = g.frac[a], fb = g.frac[b], fc = g.frac[c];
    const double w00 = (1.0 - fa) * (1.0 - fb), w01 = (1.0 - fa) * fb;
    const double w10 = fa * (1.0 - fb), w11 = fa * fb;
    const double* p00 = planes[m].value.data() + (static_cast<std::size_t>(g.index[a]) * nb + g.index[b]) * r;
    const double* p01 = p00 + r;
    const double* p10 = p00 + static_cast<std::size_t>(nb) * r;
    const double* p11 = p10 + r;
    const double* l0 = lines[m].value.data() + static_cast<std::size_t>(g.index[c]) * r;
    const double* l1 = l0 + r;
    double* o = out + m * r;
    for (int k = 0; k < r; ++k) {
      const double pv = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      const double lv = (1.0 - fc) * l0[k] + fc * l1[k];
      o[k] = pv * lv;
    }
  }
}

double FactorizedGrid::component_sum(const GridCoords& g) const {
  const int r = rank_;
  double sum = 0.0;
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    const int nb = resolution_[b];
    const double fa = g.frac[a], fb = g.frac[b], fc = g.frac[c];
    const double w00 = (1.0 - fa) * (1.0 - fb), w01 = (1.0 - fa) * fb;
    const double w10 = fa * (1.0 - fb), w11 = fa * fb;
    const double* p00 = planes[m].value.data() + (static_cast<std::size_t>(g.index[a]) * nb + g.index[b]) * r;
    const double* p01 = p00 + r;
    const double* p10 = p00 + static_cast<std::size_t>(nb) * r;
    const double* p11 = p10 + r;
    const double* l0 = lines[m].value.data() + static_cast<std::size_t>(g.index[c]) * r;
    const double* l1 = l0 + r;
    for (int k = 0; k < r; ++k) {
      const double pv = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      const double lv = (1.0 - fc) * l0[k] + fc * l1[k];
      sum += pv * lv;
    }
  }
  return sum;
}

void FactorizedGrid::components_backward(const GridCoords& g, const double* grad) {
  const int r = rank_;
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    const int nb = resolution_[b];
    const double fa = g.frac[a], fb = g.frac[b], fc = g.frac[c];
    const double w00 = (1.0 - fa) * (1.0 - fb), w01 = (1.0 - fa) * fb;
    const double w10 = fa * (1.0 - fb), w11 = fa * fb;
    const std::size_t p_off = (static_cast<std::size_t>(g.index[a]) * nb + g.index[b]) * r;
    const std::size_t row = static_cast<std::size_t>(nb) * r;
    const double* p00 = planes[m].value.data() + p_off;
    const double* l0 = lines[m].value.data() + static_cast<std::size_t>(g.index[c]) * r;
    double* gp00 = planes[m].grad.data() + p_off;
    double* gl0 = lines[m].grad.data() + static_cast<std::size_t>(g.index[c]) * r;
    const double* gm = grad + m * r;
    for (int k = 0; k < r; ++k) {
      const double pv = w00 * p00[k] + w01 * p00[k + r] + w10 * p00[k + row] + w11 * p00[k + row + r];
      const double lv = (1.0 - fc) * l0[k] + fc * l0[k + r];
      const double gpv = gm[k] * lv;
      const double glv = gm[k] * pv;
      gp00[k] += w00 * gpv;
      gp00[k + r] += w01 * gpv;
      gp00[k + row] += w10 * gpv;
      gp00[k + row + r] += w11 * gpv;
      gl0[k] += (1.0 - fc) * glv;
      gl0[k + r] += fc * glv;
    }
  }
}

void FactorizedGrid::sum_backward(const GridCoords& g, double grad) {
  const int r = rank_;
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    const int nb = resolution_[b];
    const double fa = g.frac[a], fb = g.frac[b], fc = g.frac[c];
    const double w00 = (1.0 - fa) * (1.0 - fb), w01 = (1.0 - fa) * fb;
    const double w10 = fa * (1.0 - fb), w11 = fa * fb;
    const std::size_t p_off = (static_cast<std::size_t>(g.index[a]) * nb + g.index[b]) * r;
    const std::size_t row = static_cast<std::size_t>(nb) * r;
    const double* p00 = planes[m].value.data() + p_off;
    const double* l0 = lines[m].value.data() + static_cast<std::size_t>(g.index[c]) * r;
    double* gp00 = planes[m].grad.data() + p_off;
    double* gl0 = lines[m].grad.data() + static_cast<std::size_t>(g.index[c]) * r;
    for (int k = 0; k < r; ++k) {
      const double pv = w00 * p00[k] + w01 * p00[k + r] + w10 * p00[k + row] + w11 * p00[k + row + r];
      const double lv = (1.0 - fc) * l0[k] + fc * l0[k + r];
      const double gpv = grad * lv;
      const double glv = grad * pv;
      gp00[k] += w00 * gpv;
      gp00[k + r] += w01 * gpv;
      gp00[k + row] += w10 * gpv;
      gp00[k + row + r] += w11 * gpv;
      gl0[k] += (1.0 - fc) * glv;
      gl0[k + r] += fc * glv;
    }
  }
}

void FactorizedGrid::init_normal(double scale, Rng& rng) {
  for (auto& p : planes)
    for (double& v : p.value) v = scale * normal01(rng);
  for (auto& p : lines)
    for (double& v : p.value) v = scale * normal01(rng);
  if (channels_ > 0) fan_in_uniform(basis, 3 * rank_, rng);
}

std::vector<Param*> FactorizedGrid::parameters() {
  std::vector<Param*> out = factor_parameters();
  if (channels_ > 0) out.push_back(&basis);
  return out;
}

std::vector<const Param*> FactorizedGrid::parameters() const {
  std::vector<const Param*> out;
  for (const auto& p : planes) out.push_back(&p);
  for (const auto& p : lines) out.push_back(&p);
  if (channels_ > 0) out.push_back(&basis);
  return out;
}

std::vector<Param*> FactorizedGrid::factor_parameters() {
  std::vector<Param*> out;
  for (auto& p : planes) out.push_back(&p);
  for (auto& p : lines) out.push_back(&p);
  return out;
}

std::size_t FactorizedGrid::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : parameters()) n += p->numel();
  return n;
}

FactorizedGrid FactorizedGrid::upsampled(std::array<int, 3> resolution) const {
  for (int a = 0; a < 3; ++a)
    if (resolution[a] < resolution_[a])
      throw ShapeError("upsample_grids cannot shrink axis " + std::to_string(a) + " from " +
                       std::to_string(resolution_[a]) + " to " + std::to_string(resolution[a]));
  FactorizedGrid out(prefix_, resolution, rank_, channels_, box_);
  for (int m = 0; m < 3; ++m) {
    const int a = kPlaneAxes[m][0], b = kPlaneAxes[m][1], c = kLineAxis[m];
    Buffer tmp = resample_axis(planes[m].value, {resolution_[a], resolution_[b], rank_}, 0,
                                            resolution[a]);
    out.planes[m].value = resample_axis(tmp, {resolution[a], resolution_[b], rank_}, 1, resolution[b]);
    out.lines[m].value = resample_axis(lines[m].value, {resolution_[c], rank_}, 0, resolution[c]);
  }
  if (channels_ > 0) out.basis.value = basis.value;
  return out;
}

// ---------------------------------------------------------------------------
// RadianceField

RadianceField::RadianceField(const FieldConfig& config, std::uint64_t seed) : config_(config) {
  if (config.hidden_width < 1 || config.appearance_channels < 1 || config.view_frequencies < 0)
    throw ConfigError("invalid colour decoder configuration");
  for (int a = 0; a < 3; ++a)
    if (!(config.box.hi[a] > config.box.lo[a])) throw ConfigError("bounding box must have positive extent");
  density_ = FactorizedGrid("density.", config.resolution, config.density_rank, 0, config.box);
  appearance_ = FactorizedGrid("appearance.", config.resolution, config.appearance_rank,
                               config.appearance_channels, config.box);
  const int in = decoder_input_width();
  const int h = config.hidden_width;
  w1_ = Param("color.w1", {h, in});
  b1_ = Param("color.b1", {h});
  w2_ = Param("color.w2", {3, h});
  b2_ = Param("color.b2", {3});
  if (config.density_affine) {
    affine_ = Param("density.affine", {2});
    affine_.value = {1.0, 0.0};
  }
  Rng rng(derive_seed(seed, 0xF1E1D));
  density_.init_normal(config.init_scale, rng);
  appearance_.init_normal(config.init_scale, rng);
  fan_in_uniform(w1_, in, rng);
  fan_in_uniform(b1_, in, rng);
  fan_in_uniform(w2_, h, rng);
  fan_in_uniform(b2_, h, rng);
}

std::vector<Param*> RadianceField::grid_parameters() {
  std::vector<Param*> out = density_.factor_parameters();
  for (Param* p : appearance_.factor_parameters()) out.push_back(p);
  return out;
}

std::vector<Param*> RadianceField::network_parameters() {
  std::vector<Param*> out;
  if (config_.density_affine) out.push_back(&affine_);
  if (appearance_.channels() > 0) out.push_back(&appearance_.basis);
  out.insert(out.end(), {&w1_, &b1_, &w2_, &b2_});
  return out;
}

std::vector<Param*> RadianceField::parameters() {
  std::vector<Param*> out = grid_parameters();
  for (Param* p : network_parameters()) out.push_back(p);
  return out;
}

std::vector<const Param*> RadianceField::parameters() const {
  std::vector<const Param*> out;
  for (Param* p : const_cast<RadianceField*>(this)->parameters()) out.push_back(p);
  return out;
}

void RadianceField::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

std::size_t RadianceField::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : parameters()) n += p->numel();
  return n;
}

double RadianceField::density(const Vec3& p, double* preactivation) const {
  if (!config_.box.contains(p)) return 0.0;
  const GridCoords g = density_.locate(p);
  double pre = density_.component_sum(g);
  if (config_.density_affine) pre = affine_.value[0] * pre + affine_.value[1];
  pre += config_.density_shift;
  if (preactivation) *preactivation = pre;
  return config_.density_scale * softplus(pre);
}

void RadianceField::density_backward(const Vec3& p, double preactivation, double grad_sigma) {
  if (!config_.box.contains(p) || grad_sigma == 0.0) return;
  const GridCoords g = density_.locate(p);
  const double d_pre = grad_sigma * config_.density_scale * sigmoid(preactivation);
  double d_feature = d_pre;
  if (config_.density_affine) {
    const double feature = (preactivation - config_.density_shift - affine_.value[1]) / affine_.value[0];
    affine_.grad[0] += d_pre * feature;
    affine_.grad[1] += d_pre;
    d_feature = d_pre * affine_.value[0];
  }
  density_.sum_backward(g, d_feature);
}

std::vector<double> RadianceField::query_density(std::span<const Vec3> positions) const {
  std::vector<double> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    check_finite(positions[i], "position in query_density");
    out[i] = density(positions[i]);
  }
  return out;
}

void RadianceField::encode_direction(const Vec3& d, double* out) const {
  out[0] = d.x();
  out[1] = d.y();
  out[2] = d.z();
  double scale = 1.0;
  for (int f = 0; f < config_.view_frequencies; ++f, scale *= 2.0) {
    double* o = out + 3 + 6 * f;
    for (int a = 0; a < 3; ++a) {
      o[a] = std::sin(scale * d[a]);
      o[3 + a] = std::cos(scale * d[a]);
    }
  }
}

namespace {

template <int B>
int affine_blocks(const double* __restrict x, int kdim, const double* __restrict wt, int n,
                  const double* __restrict init, double* __restrict y, int j0) {
  using Block = Eigen::Matrix<double, B, 1>;
  for (; j0 + B <= n; j0 += B) {
    Block acc = init ? Block(Eigen::Map<const Block>(init + j0)) : Block::Zero();
    for (int k = 0; k < kdim; ++k)
      acc.noalias() += x[k] * Eigen::Map<const Block>(wt + static_cast<std::size_t>(k) * n + j0);
    Eigen::Map<Block>(y + j0) = acc;
  }
  return j0;
}

// y[j] = init[j] + sum_k x[k] * wt[k * n + j], accumulated in ascending k for
// every j. Wide output blocks keep several independent chains in registers.
void row_affine(const double* __restrict x, int kdim, const double* __restrict wt, int n,
                const double* __restrict init, double* __restrict y) {
  int j0 = affine_blocks<32>(x, kdim, wt, n, init, y, 0);
  j0 = affine_blocks<16>(x, kdim, wt, n, init, y, j0);
  j0 = affine_blocks<8>(x, kdim, wt, n, init, y, j0);
  for (; j0 < n; ++j0) {
    double acc = init ? init[j0] : 0.0;
    for (int k = 0; k < kdim; ++k) acc += x[k] * wt[static_cast<std::size_t>(k) * n + j0];
    y[j0] = acc;
  }
}

}  // namespace

void RadianceField::color_forward(std::span<const Vec3> positions, std::span<const Vec3> directions,
                                  ColorTape& tape) const {
  const auto m = static_cast<Eigen::Index>(positions.size());
  const int nc = appearance_.component_count();
  const int c = config_.appearance_channels;
  const int enc = encoding_width();
  const int in = c + enc;
  const int h = config_.hidden_width;
  tape.components.resize(m, nc);
  tape.inputs.resize(m, in);
  tape.hidden.resize(m, h);
  tape.rgb.resize(m, 3);
  // Transposed weights let every row be computed with axpy-style loops whose
  // summation order does not depend on how many rows are batched together.
  const MatRM basis_t = Eigen::Map<const MatRM>(appearance_.basis.value.data(), c, nc).transpose();
  const MatRM w1_t = Eigen::Map<const MatRM>(w1_.value.data(), h, in).transpose();
  const MatRM w2_t = Eigen::Map<const MatRM>(w2_.value.data(), 3, h).transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    double* comp = tape.components.row(i).data();
    double* x = tape.inputs.row(i).data();
    double* hid = tape.hidden.row(i).data();
    if (nc > 0) appearance_.components(appearance_.locate(positions[i]), comp);
    row_affine(comp, nc, basis_t.data(), c, nullptr, x);
    encode_direction(directions[i], x + c);
    row_affine(x, in, w1_t.data(), h, b1_.value.data(), hid);
    double out[3] = {b2_.value[0], b2_.value[1], b2_.value[2]};
    const double* w2t = w2_t.data();
    for (int k = 0; k < h; ++k) {
      const double v = std::max(hid[k], 0.0);
      out[0] += v * w2t[3 * k];
      out[1] += v * w2t[3 * k + 1];
      out[2] += v * w2t[3 * k + 2];
    }
    for (int j = 0; j < 3; ++j) tape.rgb(i, j) = sigmoid(out[j]);
  }
}

void RadianceField::color_backward(std::span<const Vec3> positions, const ColorTape& tape,
                                   std::span<const double> grad_rgb) {
  const auto m = static_cast<Eigen::Index>(positions.size());
  if (m == 0) return;
  const int nc = appearance_.component_count();
  const int c = config_.appearance_channels;
  const int h = config_.hidden_width;
  const int in = decoder_input_width();
  const Eigen::Map<const MatRM> g_rgb(grad_rgb.data(), m, 3);
  const MatRM d_out = g_rgb.cwiseProduct(tape.rgb).cwiseProduct((1.0 - tape.rgb.array()).matrix());
  const MatRM hidden_act = tape.hidden.cwiseMax(0.0);

  Eigen::Map<MatRM> gw2(w2_.grad.data(), 3, h);
  Eigen::Map<Eigen::RowVectorXd> gb2(b2_.grad.data(), 3);
  gw2.noalias() += d_out.transpose() * hidden_act;
  gb2 += d_out.colwise().sum();

  const Eigen::Map<const MatRM> w2(w2_.value.data(), 3, h);
  MatRM d_hidden = d_out * w2;
  d_hidden = d_hidden.cwiseProduct((tape.hidden.array() > 0.0).cast<double>().matrix());

  Eigen::Map<MatRM> gw1(w1_.grad.data(), h, in);
  Eigen::Map<Eigen::RowVectorXd> gb1(b1_.grad.data(), h);
  gw1.noalias() += d_hidden.transpose() * tape.inputs;
  gb1 += d_hidden.colwise().sum();

  if (nc == 0) return;
  const Eigen::Map<const MatRM> w1(w1_.value.data(), h, in);
  const MatRM d_features = d_hidden * w1.leftCols(c);
  Eigen::Map<MatRM> gbasis(appearance_.basis.grad.data(), c, nc);
  gbasis.noalias() += d_features.transpose() * tape.components;
  const Eigen::Map<const MatRM> basis(appearance_.basis.value.data(), c, nc);
  const MatRM d_components = d_features * basis;
  for (Eigen::Index i = 0; i < m; ++i)
    appearance_.components_backward(appearance_.locate(positions[i]), d_components.row(i).data());
}

std::vector<Vec3> RadianceField::query_color(std::span<const Vec3> positions,
                                             std::span<const Vec3> directions) const {
  if (positions.size() != directions.size())
    throw ShapeError("query_color: positions and directions differ in length");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    check_finite(positions[i], "position in query_color");
    check_finite(directions[i], "direction in query_color");
    if (std::abs(directions[i].norm() - 1.0) > 1e-3)
      throw NumericError("query_color: direction " + std::to_string(i) + " is not unit length");
  }
  std::vector<Vec3> out(positions.size());
  constexpr std::size_t kBlock = 8192;
  ColorTape tape;
  for (std::size_t start = 0; start < positions.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, positions.size() - start);
    color_forward(positions.subspan(start, n), directions.subspan(start, n), tape);
    for (std::size_t i = 0; i < n; ++i)
      out[start + i] = Vec3(tape.rgb(i, 0), tape.rgb(i, 1), tape.rgb(i, 2));
  }
  return out;
}

RadianceField RadianceField::upsampled(std::array<int, 3> resolution) const {
  RadianceField out = *this;
  out.config_.resolution = resolution;
  out.density_ = density_.upsampled(resolution);
  out.appearance_ = appearance_.upsampled(resolution);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string field_config_json(const FieldConfig& c) {
  json j;
  j["box_min"] = {c.box.lo.x(), c.box.lo.y(), c.box.lo.z()};
  j["box_max"] = {c.box.hi.x(), c.box.hi.y(), c.box.hi.z()};
  j["resolution"] = c.resolution;
  j["density_rank"] = c.density_rank;
  j["appearance_rank"] = c.appearance_rank;
  j["appearance_channels"] = c.appearance_channels;
  j["hidden_width"] = c.hidden_width;
  j["view_frequencies"] = c.view_frequencies;
  j["density_shift"] = c.density_shift;
  j["density_scale"] = c.density_scale;
  j["density_affine"] = c.density_affine;
  j["init_scale"] = c.init_scale;
  j["density_activation"] = "shifted_softplus";
  j["color_activation"] = "sigmoid";
  j["decomposition"] = "vector_matrix";
  return j.dump();
}

FieldConfig field_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  FieldConfig c;
  auto vec = [](const json& v) { return Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()); };
  if (j.contains("box_min")) c.box.lo = vec(j["box_min"]);
  if (j.contains("box_max")) c.box.hi = vec(j["box_max"]);
  if (j.contains("resolution")) c.resolution = j["resolution"].get<std::array<int, 3>>();
  c.density_rank = j.value("density_rank", c.density_rank);
  c.appearance_rank = j.value("appearance_rank", c.appearance_rank);
  c.appearance_channels = j.value("appearance_channels", c.appearance_channels);
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.view_frequencies = j.value("view_frequencies", c.view_frequencies);
  c.density_shift = j.value("density_shift", c.density_shift);
  c.density_scale = j.value("density_scale", c.density_scale);
  c.density_affine = j.value("density_affine", c.density_affine);
  c.init_scale = j.value("init_scale", c.init_scale);
  if (j.value("density_activation", std::string("shifted_softplus")) != "shifted_softplus")
    throw FormatError("unsupported density activation in field header");
  return c;
}

void RadianceField::save(Archive& archive, const std::string& prefix) const {
  for (const Param* p : parameters()) archive.add(*p, prefix);
  json meta = json::parse(archive.meta_json);
  meta[prefix.empty() ? "field" : prefix.substr(0, prefix.size() - 1)] =
      json::parse(field_config_json(config_));
  archive.meta_json = meta.dump();
}

RadianceField RadianceField::load(const Archive& archive, const std::string& prefix) {
  const json meta = json::parse(archive.meta_json);
  const std::string key = prefix.empty() ? "field" : prefix.substr(0, prefix.size() - 1);
  if (!meta.contains(key)) throw FormatError("checkpoint lacks '" + key + "' header");
  RadianceField field(field_config_from_json(meta[key].dump()), 0);
  for (Param* p : field.parameters()) {
    const ArchiveArray& a = archive.at(prefix + p->name);
    if (a.shape != p->shape)
      throw FormatError("array '" + prefix + p->name + "' has shape " + shape_string(a.shape) +
                        ", expected " + shape_string(p->shape));
    p->value = a.data;
  }
  return field;
}

}  // namespace nerfsr
