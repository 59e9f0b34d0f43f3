// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/sr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Core>

#include "json.hpp"

namespace nerfsr {
namespace {

using json = nlohmann::json;
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kMinSize = 8;
// Upper bound on im2col rows x pixels per forward band (doubles).
constexpr std::size_t kBandBudget = std::size_t{1} << 23;

inline int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// cols[(c * 9 + ky * 3 + kx), (y - row0) * W + x] for output rows [row0, row1).
void im2col(const Tensor& x, int row0, int row1, MatRM& cols) {
  const int w = x.width;
  const int h = x.height;
  const int rows = row1 - row0;
  cols.resize(static_cast<Eigen::Index>(x.channels) * 9, static_cast<Eigen::Index>(rows) * w);
  for (int c = 0; c < x.channels; ++c) {
    const double* src = x.data.data() + c * x.plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int y = row0; y < row1; ++y) {
          const double* s = src + static_cast<std::size_t>(reflect(y + ky - 1, h)) * w;
          double* d = dst + static_cast<std::size_t>(y - row0) * w;
          const int dx = kx - 1;
          const int lo = std::max(0, -dx);
          const int hi = std::min(w, w - dx);
          for (int xx = lo; xx < hi; ++xx) d[xx] = s[xx + dx];
          for (int xx = 0; xx < lo; ++xx) d[xx] = s[reflect(xx + dx, w)];
          for (int xx = hi; xx < w; ++xx) d[xx] = s[reflect(xx + dx, w)];
        }
      }
    }
  }
}

// Adjoint of im2col over the full image.
void col2im_add(const MatRM& cols, Tensor& dx) {
  const int w = dx.width;
  const int h = dx.height;
  for (int c = 0; c < dx.channels; ++c) {
    double* dst = dx.data.data() + c * dx.plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          double* d = dst + static_cast<std::size_t>(reflect(y + ky - 1, h)) * w;
          const double* s = src + static_cast<std::size_t>(y) * w;
          const int ddx = kx - 1;
          for (int xx = 0; xx < w; ++xx) d[reflect(xx + ddx, w)] += s[xx];
        }
      }
    }
  }
}

void check_input(const Image& image) {
  if (image.channels != 3) throw ShapeError("SR input must have 3 channels");
  if (image.height < kMinSize || image.width < kMinSize)
    throw ShapeError("SR input must be at least 8x8, got " + std::to_string(image.width) + "x" +
                     std::to_string(image.height));
  if (!all_finite(image.data)) throw NumericError("SR input contains non-finite values");
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data) v = std::max(v, 0.0);
}

void add_scaled(Tensor& dst, const Tensor& src, double scale) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

Tensor shifted_input(const Image& image, const std::array<double, 3>& mean) {
  Tensor t = image_to_tensor(image);
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < t.plane(); ++p) t.data[c * t.plane() + p] -= mean[c];
  return t;
}

Image output_image(Tensor t, const std::array<double, 3>& mean) {
  for (int c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < t.plane(); ++p) t.data[c * t.plane() + p] += mean[c];
  return tensor_to_image(t);
}

json config_json(const SRConfig& c) {
  return json{{"ratio", c.ratio},
              {"n_blocks", c.n_blocks},
              {"n_channels", c.n_channels},
              {"residual_scale", c.residual_scale},
              {"mean_shift", c.mean_shift}};
}

SRConfig config_from_json(const json& j) {
  SRConfig c;
  c.ratio = j.at("ratio").get<int>();
  c.n_blocks = j.at("n_blocks").get<int>();
  c.n_channels = j.at("n_channels").get<int>();
  c.residual_scale = j.value("residual_scale", c.residual_scale);
  if (j.contains("mean_shift")) c.mean_shift = j["mean_shift"].get<std::array<double, 3>>();
  return c;
}

}  // namespace

Tensor image_to_tensor(const Image& image) {
  Tensor t(image.channels, image.height, image.width);
  const std::size_t plane = t.plane();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < image.channels; ++c) t.data[c * plane + p] = image.data[p * image.channels + c];
  return t;
}

Image tensor_to_image(const Tensor& t) {
  Image image(t.height, t.width, t.channels);
  const std::size_t plane = t.plane();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < t.channels; ++c) image.data[p * t.channels + c] = t.data[c * plane + p];
  return image;
}

// ---------------------------------------------------------------------------
// Conv3x3

Conv3x3::Conv3x3(const std::string& name, int in_channels, int out_channels)
    : weight(name + ".weight", {out_channels, in_channels, 3, 3}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels) {}

void Conv3x3::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(9.0 * in_);
  for (double& v : weight.value) v = (2.0 * uniform01(rng) - 1.0) * bound;
  for (double& v : bias.value) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

void Conv3x3::forward(const Tensor& x, Tensor& y) const {
  if (x.channels != in_) throw ShapeError("conv " + weight.name + ": channel mismatch");
  y = Tensor(out_, x.height, x.width);
  const Eigen::Map<const MatRM> w(weight.value.data(), out_, static_cast<Eigen::Index>(in_) * 9);
  const std::size_t per_row = static_cast<std::size_t>(in_) * 9 * x.width;
  const int band = std::max(1, static_cast<int>(kBandBudget / std::max<std::size_t>(per_row, 1)));
  MatRM cols;
  for (int row0 = 0; row0 < x.height; row0 += band) {
    const int row1 = std::min(x.height, row0 + band);
    im2col(x, row0, row1, cols);
    const MatRM out = w * cols;
    const std::size_t offset = static_cast<std::size_t>(row0) * x.width;
    for (int o = 0; o < out_; ++o) {
      double* dst = y.data.data() + o * y.plane() + offset;
      const double b = bias.value[o];
      const double* src = out.row(o).data();
      for (Eigen::Index p = 0; p < out.cols(); ++p) dst[p] = src[p] + b;
    }
  }
}

void Conv3x3::backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
  const auto hw = static_cast<Eigen::Index>(x.plane());
  MatRM cols;
  im2col(x, 0, x.height, cols);
  const Eigen::Map<const MatRM> g(dy.data.data(), out_, hw);
  Eigen::Map<MatRM> gw(weight.grad.data(), out_, static_cast<Eigen::Index>(in_) * 9);
  gw.noalias() += g * cols.transpose();
  for (int o = 0; o < out_; ++o) bias.grad[o] += g.row(o).sum();
  if (dx) {
    const Eigen::Map<const MatRM> w(weight.value.data(), out_, static_cast<Eigen::Index>(in_) * 9);
    const MatRM dcols = w.transpose() * g;
    *dx = Tensor(in_, x.height, x.width);
    col2im_add(dcols, *dx);
  }
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  if (x.channels % (r * r) != 0) throw ShapeError("pixel_shuffle: channels not divisible by r^2");
  Tensor y(x.channels / (r * r), x.height * r, x.width * r);
  for (int c = 0; c < y.channels; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int src_c = c * r * r + i * r + j;
        for (int h = 0; h < x.height; ++h)
          for (int w = 0; w < x.width; ++w) y.at(c, h * r + i, w * r + j) = x.at(src_c, h, w);
      }
  return y;
}

Tensor pixel_unshuffle(const Tensor& y, int r) {
  if (y.height % r != 0 || y.width % r != 0) throw ShapeError("pixel_unshuffle: size not divisible");
  Tensor x(y.channels * r * r, y.height / r, y.width / r);
  for (int c = 0; c < y.channels; ++c)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int dst_c = c * r * r + i * r + j;
        for (int h = 0; h < x.height; ++h)
          for (int w = 0; w < x.width; ++w) x.at(dst_c, h, w) = y.at(c, h * r + i, w * r + j);
      }
  return x;
}

// ---------------------------------------------------------------------------
// SRNetwork

SRNetwork::SRNetwork(const SRConfig& config, std::uint64_t seed) : config_(config) {
  int stages = 0;
  switch (config.ratio) {
    case 2: stages = 1; break;
    case 4: stages = 2; break;
    case 8: stages = 3; break;
    default:
      throw ConfigError("SR ratio must be 2, 4 or 8, got " + std::to_string(config.ratio));
  }
  if (config.n_blocks < 0 || config.n_channels < 1) throw ConfigError("invalid SR width/depth");
  const int c = config.n_channels;
  head_ = Conv3x3("head", 3, c);
  for (int b = 0; b < config.n_blocks; ++b) {
    const std::string name = "block" + std::to_string(b);
    blocks_.push_back({Conv3x3(name + ".conv1", c, c), Conv3x3(name + ".conv2", c, c)});
  }
  body_ = Conv3x3("body", c, c);
  for (int s = 0; s < stages; ++s) upsample_.emplace_back("up" + std::to_string(s), c, 4 * c);
  tail_ = Conv3x3("tail", c, 3);

  Rng rng(derive_seed(seed, 0x5EED5));
  head_.init_uniform(rng);
  for (auto& block : blocks_)
    for (auto& conv : block) conv.init_uniform(rng);
  body_.init_uniform(rng);
  for (auto& conv : upsample_) {
    conv.init_uniform(rng);
    // The four outputs feeding one shuffled channel start out identical, so
    // the untrained network has no checkerboard pattern.
    const std::size_t row = static_cast<std::size_t>(c) * 9;
    for (int ch = 0; ch < c; ++ch)
      for (int k = 1; k < 4; ++k) {
        std::copy_n(&conv.weight.value[(4 * ch) * row], row, &conv.weight.value[(4 * ch + k) * row]);
        conv.bias.value[4 * ch + k] = conv.bias.value[4 * ch];
      }
  }
  tail_.init_uniform(rng);
}

Image SRNetwork::upscale(const Image& image) const {
  Tape tape;
  return forward(image, tape);
}

Image SRNetwork::forward(const Image& image, Tape& tape) const {
  check_input(image);
  tape.input = shifted_input(image, config_.mean_shift);
  head_.forward(tape.input, tape.head);
  tape.block_in.resize(blocks_.size());
  tape.block_mid.resize(blocks_.size());
  Tensor r = tape.head;
  Tensor tmp;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    tape.block_in[b] = r;
    blocks_[b][0].forward(r, tape.block_mid[b]);
    Tensor act = tape.block_mid[b];
    relu_inplace(act);
    blocks_[b][1].forward(act, tmp);
    add_scaled(r, tmp, config_.residual_scale);
  }
  tape.body_in = std::move(r);
  Tensor u;
  body_.forward(tape.body_in, u);
  add_scaled(u, tape.head, 1.0);
  tape.stage_in.resize(upsample_.size());
  for (std::size_t s = 0; s < upsample_.size(); ++s) {
    tape.stage_in[s] = u;
    upsample_[s].forward(u, tmp);
    u = pixel_shuffle(tmp, 2);
  }
  tape.tail_in = std::move(u);
  Tensor out;
  tail_.forward(tape.tail_in, out);
  return output_image(std::move(out), config_.mean_shift);
}

Image SRNetwork::backward(const Tape& tape, const Image& grad_output) {
  const Tensor g_out = image_to_tensor(grad_output);
  Tensor g;
  tail_.backward(tape.tail_in, g_out, &g);
  for (std::size_t s = upsample_.size(); s-- > 0;) {
    const Tensor g_conv = pixel_unshuffle(g, 2);
    upsample_[s].backward(tape.stage_in[s], g_conv, &g);
  }
  // g is d/d(body output + head skip)
  Tensor g_head = g;
  Tensor g_r;
  body_.backward(tape.body_in, g, &g_r);
  Tensor g_tmp, g_act;
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    // r_out = r_in + scale * conv2(relu(conv1(r_in)))
    Tensor scaled = g_r;
    for (double& v : scaled.data) v *= config_.residual_scale;
    Tensor act = tape.block_mid[b];
    relu_inplace(act);
    blocks_[b][1].backward(act, scaled, &g_act);
    for (std::size_t i = 0; i < g_act.data.size(); ++i)
      if (tape.block_mid[b].data[i] <= 0.0) g_act.data[i] = 0.0;
    blocks_[b][0].backward(tape.block_in[b], g_act, &g_tmp);
    add_scaled(g_r, g_tmp, 1.0);
  }
  add_scaled(g_head, g_r, 1.0);
  Tensor g_in;
  head_.backward(tape.input, g_head, &g_in);
  return tensor_to_image(g_in);
}

std::vector<Param*> SRNetwork::parameters() {
  std::vector<Param*> out{&head_.weight, &head_.bias};
  for (auto& block : blocks_)
    for (auto& conv : block) out.insert(out.end(), {&conv.weight, &conv.bias});
  out.insert(out.end(), {&body_.weight, &body_.bias});
  for (auto& conv : upsample_) out.insert(out.end(), {&conv.weight, &conv.bias});
  out.insert(out.end(), {&tail_.weight, &tail_.bias});
  return out;
}

std::vector<const Param*> SRNetwork::parameters() const {
  std::vector<const Param*> out;
  for (Param* p : const_cast<SRNetwork*>(this)->parameters()) out.push_back(p);
  return out;
}

std::size_t SRNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : parameters()) n += p->numel();
  return n;
}

void SRNetwork::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

void SRNetwork::save(Archive& archive, const std::string& prefix) const {
  for (const Param* p : parameters()) archive.add(*p, prefix);
  archive.add(prefix + "mean_shift", {3},
              {config_.mean_shift[0], config_.mean_shift[1], config_.mean_shift[2]});
  json meta = json::parse(archive.meta_json);
  meta[prefix.empty() ? "sr" : prefix.substr(0, prefix.size() - 1)] = config_json(config_);
  archive.meta_json = meta.dump();
}

SRNetwork SRNetwork::load(const Archive& archive, const std::string& prefix) {
  const json meta = json::parse(archive.meta_json);
  const std::string key = prefix.empty() ? "sr" : prefix.substr(0, prefix.size() - 1);
  if (!meta.contains(key)) throw FormatError("checkpoint lacks '" + key + "' header");
  SRNetwork net(config_from_json(meta[key]), 0);
  for (Param* p : net.parameters()) {
    const ArchiveArray& a = archive.at(prefix + p->name);
    if (a.shape != p->shape)
      throw FormatError("array '" + prefix + p->name + "' has shape " + shape_string(a.shape) +
                        ", expected " + shape_string(p->shape));
    p->value = a.data;
  }
  if (const ArchiveArray* m = archive.find(prefix + "mean_shift"); m && m->data.size() == 3)
    net.config_.mean_shift = {m->data[0], m->data[1], m->data[2]};
  return net;
}

// ---------------------------------------------------------------------------
// Pretrained weights

PretrainedLoadReport load_pretrained(SRNetwork& net, const std::filesystem::path& path, bool strict) {
  if (!std::filesystem::exists(path))
    throw FormatError("pretrained SR checkpoint not found: " + path.string());
  return load_pretrained(net, load_archive(path), strict);
}

PretrainedLoadReport load_pretrained(SRNetwork& net, const Archive& archive, bool strict) {
  PretrainedLoadReport report;
  const std::string prefix = "sr.";
  // Validate everything before mutating the network.
  for (Param* p : net.parameters()) {
    const ArchiveArray* a = archive.find(prefix + p->name);
    if (!a) {
      if (strict) throw ShapeError("pretrained checkpoint lacks array '" + p->name + "'");
      report.skipped.push_back(p->name);
      continue;
    }
    if (a->shape != p->shape) {
      if (strict)
        throw ShapeError("pretrained array '" + p->name + "' has shape " + shape_string(a->shape) +
                         ", network expects " + shape_string(p->shape));
      report.skipped.push_back(p->name);
      continue;
    }
  }
  if (strict) {
    std::set<std::string> expected{prefix + "mean_shift"};
    for (const Param* p : std::as_const(net).parameters()) expected.insert(prefix + p->name);
    for (const ArchiveArray& a : archive.arrays)
      if (a.name.starts_with(prefix) && !expected.count(a.name))
        throw ShapeError("pretrained checkpoint has unexpected array '" + a.name.substr(prefix.size()) +
                         "' (different ratio or depth?)");
  }
  for (Param* p : net.parameters()) {
    const ArchiveArray* a = archive.find(prefix + p->name);
    if (a && a->shape == p->shape) {
      p->value = a->data;
      report.loaded.push_back(p->name);
    }
  }
  if (const ArchiveArray* m = archive.find(prefix + "mean_shift"); m && m->data.size() == 3)
    net.set_mean_shift({m->data[0], m->data[1], m->data[2]});
  return report;
}

NameTable NameTable::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open name table " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("malformed name table " + path.string() + ": " + e.what());
  }
  NameTable table;
  table.input_range = j.value("input_range", 1.0);
  if (j.contains("mean")) table.mean = j["mean"].get<std::array<double, 3>>();
  for (const auto& r : j.at("rules"))
    table.rules.push_back({r.at("source").get<std::string>(), r.at("target").get<std::string>()});
  return table;
}

std::string NameTable::translate(const std::string& source) const {
  for (const Rule& rule : rules) {
    const auto pos = rule.source.find("{i}");
    if (pos == std::string::npos) {
      if (source == rule.source) return rule.target;
      continue;
    }
    const std::string head = rule.source.substr(0, pos);
    const std::string tail = rule.source.substr(pos + 3);
    if (source.size() <= head.size() + tail.size() || !source.starts_with(head) ||
        !source.ends_with(tail))
      continue;
    const std::string index = source.substr(head.size(), source.size() - head.size() - tail.size());
    if (!std::all_of(index.begin(), index.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    std::string target = rule.target;
    if (const auto tpos = target.find("{i}"); tpos != std::string::npos) target.replace(tpos, 3, index);
    return target;
  }
  return {};
}

Archive import_named_arrays(const std::map<std::string, NpyArray>& arrays, const NameTable& table,
                            const SRConfig& config) {
  Archive archive;
  archive.kind = "sr";
  SRConfig cfg = config;
  cfg.mean_shift = table.mean;
  archive.meta_json = json{{"sr", config_json(cfg)}}.dump();
  for (const auto& [name, array] : arrays) {
    const std::string target = table.translate(name);
    if (target.empty()) continue;
    Buffer data = array.data;
    if (target.ends_with(".bias") && table.input_range != 1.0)
      for (double& v : data) v /= table.input_range;
    archive.add("sr." + target, array.shape, std::move(data));
  }
  archive.add("sr.mean_shift", {3}, {table.mean[0], table.mean[1], table.mean[2]});
  return archive;
}

std::map<std::string, NpyArray> read_npy_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::map<std::string, NpyArray> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".npy") out[entry.path().stem().string()] = read_npy(entry.path());
  return out;
}

}  // namespace nerfsr
