// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "nerfsr/checkpoint.hpp"
#include "nerfsr/sr.hpp"

namespace nerfsr {
namespace {

using nlohmann::json;

void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                     std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                     std::to_string(b.channels) + ")");
}

std::vector<double> gray(const Image& img) {
  std::vector<double> out(img.pixel_count());
  const double inv = 1.0 / img.channels;
  for (std::size_t p = 0; p < out.size(); ++p) {
    double s = 0.0;
    for (int c = 0; c < img.channels; ++c) s += img.data[p * img.channels + c];
    out[p] = s * inv;
  }
  return out;
}

// Separable 'valid' filtering of an h x w array with a normalized 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

Tensor max_pool2(const Tensor& x) {
  Tensor y(x.channels, x.height / 2, x.width / 2);
  for (int c = 0; c < y.channels; ++c)
    for (int i = 0; i < y.height; ++i)
      for (int j = 0; j < y.width; ++j)
        y.at(c, i, j) = std::max({x.at(c, 2 * i, 2 * j), x.at(c, 2 * i, 2 * j + 1),
                                  x.at(c, 2 * i + 1, 2 * j), x.at(c, 2 * i + 1, 2 * j + 1)});
  return y;
}

struct FeatureNet {
  struct Layer {
    std::string type;
    Conv3x3 conv;
  };
  std::vector<Layer> layers;
  std::vector<std::vector<double>> tap_weights;
  std::array<double, 3> shift{0.0, 0.0, 0.0};
  std::array<double, 3> scale{1.0, 1.0, 1.0};

  std::vector<Tensor> features(const Image& image) const {
    Tensor x = image_to_tensor(image);
    for (int c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < x.plane(); ++p) {
        double& v = x.data[c * x.plane() + p];
        v = (2.0 * v - 1.0 - shift[c]) / scale[c];
      }
    std::vector<Tensor> taps;
    Tensor tmp;
    for (const Layer& layer : layers) {
      if (layer.type == "conv") {
        layer.conv.forward(x, tmp);
        x = std::move(tmp);
      } else if (layer.type == "relu") {
        for (double& v : x.data) v = std::max(v, 0.0);
      } else if (layer.type == "pool") {
        x = max_pool2(x);
      } else if (layer.type == "tap") {
        taps.push_back(x);
      }
    }
    return taps;
  }
};

FeatureNet load_feature_net(const Archive& archive) {
  if (archive.kind != "perceptual") throw FormatError("archive kind is not 'perceptual'");
  const json meta = json::parse(archive.meta_json);
  FeatureNet net;
  if (meta.contains("shift")) net.shift = meta["shift"].get<std::array<double, 3>>();
  if (meta.contains("scale")) net.scale = meta["scale"].get<std::array<double, 3>>();
  for (const auto& l : meta.at("layers")) {
    FeatureNet::Layer layer;
    layer.type = l.at("type").get<std::string>();
    if (layer.type == "conv") {
      const std::string name = l.at("name").get<std::string>();
      const ArchiveArray& w = archive.at(name + ".weight");
      if (w.shape.size() != 4 || w.shape[2] != 3 || w.shape[3] != 3)
        throw FormatError("perceptual layer " + name + " is not a 3x3 convolution");
      layer.conv = Conv3x3(name, static_cast<int>(w.shape[1]), static_cast<int>(w.shape[0]));
      layer.conv.weight.value = w.data;
      layer.conv.bias.value = archive.at(name + ".bias").data;
    } else if (layer.type == "tap") {
      const std::string lin = "lin" + std::to_string(net.tap_weights.size()) + ".weight";
      const ArchiveArray* a = archive.find(lin);
      net.tap_weights.push_back(a ? std::vector<double>(a->data.begin(), a->data.end()) : std::vector<double>{});
    } else if (layer.type != "relu" && layer.type != "pool") {
      throw FormatError("unknown perceptual layer type '" + layer.type + "'");
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  check_same_shape(a, b, "psnr");
  if (a.data.empty()) throw ShapeError("psnr of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& a, const Image& b, int window, double sigma, double k1, double k2,
            double peak) {
  check_same_shape(a, b, "ssim");
  if (window < 1 || a.height < window || a.width < window)
    throw ShapeError("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " is smaller than the " + std::to_string(window) + "-pixel window");
  std::vector<double> k(window);
  double total = 0.0;
  for (int i = 0; i < window; ++i) {
    const double x = i - (window - 1) / 2.0;
    k[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  const std::vector<double> x = gray(a);
  const std::vector<double> y = gray(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, a.height, a.width, k);
  const auto my = filter_valid(y, a.height, a.width, k);
  const auto mxx = filter_valid(xx, a.height, a.width, k);
  const auto myy = filter_valid(yy, a.height, a.width, k);
  const auto mxy = filter_valid(xy, a.height, a.width, k);
  const double c1 = (k1 * peak) * (k1 * peak);
  const double c2 = (k2 * peak) * (k2 * peak);
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cxy = mxy[i] - mx[i] * my[i];
    sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return std::clamp(sum / static_cast<double>(mx.size()), -1.0, 1.0);
}

PerceptualResult perceptual_distance(const Image& a, const Image& b,
                                     const std::filesystem::path& weights_path) {
  check_same_shape(a, b, "perceptual_distance");
  PerceptualResult result;
  if (weights_path.empty() || !std::filesystem::exists(weights_path)) {
    result.status = "unavailable: perceptual network weights not found at '" +
                    weights_path.string() + "'";
    return result;
  }
  const FeatureNet net = load_feature_net(load_archive(weights_path));
  const auto fa = net.features(a);
  const auto fb = net.features(b);
  double total = 0.0;
  for (std::size_t t = 0; t < fa.size(); ++t) {
    const Tensor& x = fa[t];
    const Tensor& y = fb[t];
    const std::size_t plane = x.plane();
    const auto& w = net.tap_weights[t];
    double layer = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      double nx = 0.0, ny = 0.0;
      for (int c = 0; c < x.channels; ++c) {
        nx += x.data[c * plane + p] * x.data[c * plane + p];
        ny += y.data[c * plane + p] * y.data[c * plane + p];
      }
      nx = std::sqrt(nx) + 1e-10;
      ny = std::sqrt(ny) + 1e-10;
      for (int c = 0; c < x.channels; ++c) {
        const double d = x.data[c * plane + p] / nx - y.data[c * plane + p] / ny;
        layer += (w.empty() ? 1.0 : w[c]) * d * d;
      }
    }
    total += layer / static_cast<double>(std::max<std::size_t>(plane, 1));
  }
  result.available = true;
  result.value = total;
  result.status = "ok";
  return result;
}

ProfileResult profile_render(const Pipeline& pipeline, std::span<const CameraModel> cameras,
                             int repeats) {
  if (repeats < 1) throw ConfigError("profile_render needs at least one repeat");
  ProfileResult out;
  out.field_bytes = pipeline.field_bytes();
  out.sr_bytes = pipeline.sr_bytes();
  out.total_bytes = pipeline.total_bytes();
  if (cameras.empty()) return out;
  render_pipeline(pipeline, cameras.front());  // warm-up, untimed
  std::vector<double> times;
  for (int r = 0; r < repeats; ++r)
    for (const CameraModel& cam : cameras) {
      const auto start = std::chrono::steady_clock::now();
      render_pipeline(pipeline, cam);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  out.frames = static_cast<int>(times.size());
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= static_cast<double>(times.size());
  out.mean_seconds = mean;
  if (repeats == 1) {
    out.std_seconds = 0.0;
  } else {
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    out.std_seconds = std::sqrt(var / static_cast<double>(times.size()));
  }
  return out;
}

double MethodResult::mean_psnr() const {
  if (views.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : views) s += std::min(v.psnr, kPsnrCap);
  return s / static_cast<double>(views.size());
}

double MethodResult::mean_ssim() const {
  if (views.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : views) s += v.ssim;
  return s / static_cast<double>(views.size());
}

std::optional<double> MethodResult::mean_perceptual() const {
  if (views.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& v : views) {
    if (!v.perceptual) return std::nullopt;
    s += *v.perceptual;
  }
  return s / static_cast<double>(views.size());
}

std::vector<ViewMetrics> evaluate_views(std::span<const Image> renders,
                                        std::span<const Image> ground_truth,
                                        std::span<const std::string> names) {
  if (renders.size() != ground_truth.size())
    throw ShapeError("evaluate_views: " + std::to_string(renders.size()) + " renders for " +
                     std::to_string(ground_truth.size()) + " ground-truth images");
  std::vector<ViewMetrics> out;
  for (std::size_t i = 0; i < renders.size(); ++i) {
    ViewMetrics m;
    m.name = i < names.size() ? names[i] : "view_" + std::to_string(i);
    m.psnr = psnr(renders[i], ground_truth[i]);
    m.ssim = ssim(renders[i], ground_truth[i]);
    out.push_back(std::move(m));
  }
  return out;
}

EvalReport build_report(std::vector<MethodResult> results) {
  EvalReport report;
  report.rows = std::move(results);
  return report;
}

std::string EvalReport::table() const {
  const std::vector<std::string> header = {"Scene",         "Method",         "PSNR",
                                           "SSIM",          "Perceptual",     "Train(s)",
                                           "Render(s)",     "Field(MB)",      "SR(MB)",
                                           "Total(MB)"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    const auto perceptual = r.mean_perceptual();
    const double mb = 1024.0 * 1024.0;
    cells.push_back({r.scene, r.method, fixed(r.mean_psnr(), 2), fixed(r.mean_ssim(), 4),
                     perceptual ? fixed(*perceptual, 4) : "n/a",
                     r.train_seconds < 0.0 ? "n/a" : fixed(r.train_seconds, 1),
                     fixed(r.render_seconds, 3), fixed(r.field_bytes / mb, 3),
                     fixed(r.sr_bytes / mb, 3), fixed((r.field_bytes + r.sr_bytes) / mb, 3)});
  }
  if (!include_timing)
    for (auto& row : cells) row.erase(row.begin() + 5, row.begin() + 7);
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) out << "  ";
      const std::string& s = cells[r][c];
      if (c < 2)
        out << s << std::string(width[c] - s.size(), ' ');
      else
        out << std::string(width[c] - s.size(), ' ') << s;
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
  return out.str();
}

std::string EvalReport::json() const {
  nlohmann::json j;
  j["averaging"] = averaging;
  j["psnr_cap_db"] = kPsnrCap;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["scene"] = r.scene;
    row["method"] = r.method;
    row["mean_psnr"] = r.mean_psnr();
    row["mean_ssim"] = r.mean_ssim();
    if (const auto p = r.mean_perceptual()) row["mean_perceptual"] = *p;
    row["perceptual_status"] = r.perceptual_status;
    if (include_timing) {
      row["render_seconds"] = r.render_seconds;
      if (r.train_seconds >= 0.0) row["train_seconds"] = r.train_seconds;
    }
    row["bytes"] = {{"field", r.field_bytes}, {"sr", r.sr_bytes}, {"total", r.field_bytes + r.sr_bytes}};
    row["config_fingerprint"] = r.config_fingerprint;
    row["device"] = r.device;
    row["views"] = nlohmann::json::array();
    for (const auto& v : r.views) {
      nlohmann::json view{{"name", v.name},
                          {"psnr", std::min(v.psnr, kPsnrCap)},
                          {"psnr_infinite", std::isinf(v.psnr)},
                          {"ssim", v.ssim}};
      if (v.perceptual) view["perceptual"] = *v.perceptual;
      row["views"].push_back(view);
    }
    j["rows"].push_back(row);
  }
  return j.dump(2) + "\n";
}

}  // namespace nerfsr
