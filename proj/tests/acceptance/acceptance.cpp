// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
//
// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is non-zero only when a criterion outside --known-failures
// fails, or when a known failure unexpectedly passes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "CLI11.hpp"
#include "desk.hpp"
#include "json.hpp"
#include "nerfsr/checkpoint.hpp"
#include "nerfsr/image.hpp"
#include "nerfsr/pipeline.hpp"
#include "nerfsr/renderer.hpp"
#include "nerfsr/sampling.hpp"

namespace nerfsr::acceptance {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
  json metrics = json::object();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

/// Collects named sub-checks; the outcome passes when all of them do.
class Checklist {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    ++count_;
  }
  Outcome outcome(std::string summary, json metrics = json::object()) const {
    Outcome o;
    o.pass = failures_.empty();
    o.detail = std::move(summary);
    if (!failures_.empty()) {
      o.detail += "; failed:";
      for (const auto& f : failures_) o.detail += " [" + f + "]";
    }
    metrics["checks"] = count_;
    metrics["failed_checks"] = failures_;
    o.metrics = std::move(metrics);
    return o;
  }

 private:
  std::vector<std::string> failures_;
  int count_ = 0;
};

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("nerfsr_accept_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// 1. Compositing oracle

Outcome compositing_oracle() {
  const auto start = Clock::now();
  constexpr int kRays = 100;
  constexpr int kSamples = 64;
  Rng rng(20260101);
  std::vector<double> sigmas, deltas;
  std::vector<Vec3> colors;
  for (int i = 0; i < kRays * kSamples; ++i) {
    // Mostly moderate densities with occasional near-opaque samples.
    sigmas.push_back(uniform01(rng) < 0.1 ? 50.0 * uniform01(rng) : 2.0 * uniform01(rng));
    deltas.push_back(0.001 + 0.1 * uniform01(rng));
    colors.emplace_back(uniform01(rng), uniform01(rng), uniform01(rng));
  }
  const Vec3 bg(uniform01(rng), uniform01(rng), uniform01(rng));
  const CompositeResult got = composite(sigmas, colors, deltas, kSamples, bg);

  double max_color = 0.0, max_weight = 0.0, max_norm = 0.0;
  for (int r = 0; r < kRays; ++r) {
    double transmittance = 1.0, weight_sum = 0.0, optical_depth = 0.0;
    Vec3 c = Vec3::Zero();
    for (int i = 0; i < kSamples; ++i) {
      const std::size_t k = static_cast<std::size_t>(r) * kSamples + i;
      const double alpha = 1.0 - std::exp(-sigmas[k] * deltas[k]);
      const double w = transmittance * alpha;
      c += w * colors[k];
      transmittance *= 1.0 - alpha;
      optical_depth += sigmas[k] * deltas[k];
      max_weight = std::max(max_weight, std::abs(w - got.weights[k]));
      weight_sum += got.weights[k];
    }
    c += transmittance * bg;
    max_color = std::max(max_color, (c - got.colors[r]).cwiseAbs().maxCoeff());
    max_norm = std::max(max_norm, std::abs(weight_sum + std::exp(-optical_depth) - 1.0));
  }
  const double seconds = seconds_since(start);
  Checklist list;
  list.check(max_color <= 1e-5, "colour max-abs <= 1e-5");
  list.check(max_weight <= 1e-5, "weight max-abs <= 1e-5");
  list.check(max_norm <= 1e-6, "sum w + T = 1 within 1e-6");
  list.check(seconds < 10.0, "runtime < 10 s");
  return list.outcome("100 rays x 64 samples: colour max|d|=" + fmt(max_color) + ", weight max|d|=" +
                          fmt(max_weight) + ", |sum w + T - 1|=" + fmt(max_norm) + ", " +
                          fmt(seconds, 3) + " s",
                      {{"max_color", max_color}, {"max_weight", max_weight}, {"max_norm", max_norm},
                       {"seconds", seconds}});
}

// ---------------------------------------------------------------------------
// 2. Gradient fidelity

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  ToySceneSpec spec = ToySceneSpec::standard(3);
  spec.width = spec.height = 16;
  spec.n_train = 1;
  spec.n_test = 1;
  spec.n_val = 0;
  spec.supersample = 1;
  const ToyScene scene = generate_toy_scene(spec);

  FieldConfig fc;
  fc.box = scene.dataset.box;
  fc.resolution = {4, 4, 4};
  fc.density_rank = 2;
  fc.appearance_rank = 2;
  fc.appearance_channels = 4;
  fc.hidden_width = 8;
  fc.view_frequencies = 1;
  fc.density_shift = 0.0;
  fc.density_scale = 1.0;
  fc.init_scale = 0.5;
  RadianceField field(fc, 11);
  SRConfig sc;
  sc.ratio = 2;
  sc.n_blocks = 1;
  sc.n_channels = 8;
  SRNetwork sr(sc, 12);

  RenderConfig rc;
  rc.n_samples = 16;
  rc.stratified = false;
  rc.weight_threshold = 0.0;
  rc.background = scene.dataset.background;
  const View& view = scene.dataset.train[0];
  const PatchPair pair = make_patch_pair(view.image, view.camera, PatchSpec{0, 0, 16, 2, std::nullopt});

  field.zero_grad();
  sr.zero_grad();
  compute_patch_loss(field, &sr, rc, pair, true);

  struct Family {
    std::string name;
    std::vector<Param*> params;
  };
  std::vector<Family> families{{"field-grid", field.grid_parameters()},
                               {"decoder", field.network_parameters()},
                               {"sr", sr.parameters()}};
  // Central differences are only meaningful when the stencil stays on one
  // side of every ReLU; entries whose stencil flips a preactivation sign are
  // resampled and counted.
  auto relu_signs = [&] {
    std::vector<bool> signs;
    RenderTape tape;
    render_rays(field, pair.lr_rays, 0, pair.lr_rays.origins.size(), rc, &tape);
    for (double h : tape.colors.hidden.reshaped()) signs.push_back(h > 0.0);
    SRNetwork::Tape sr_tape;
    sr.forward(compute_patch_loss(field, &sr, rc, pair, false).lr_render, sr_tape);
    for (const Tensor& t : sr_tape.block_mid)
      for (double v : t.data) signs.push_back(v > 0.0);
    return signs;
  };
  constexpr double kStep = 1e-4;
  constexpr std::size_t kPerTensor = 3;
  Rng rng(99);
  double max_rel = 0.0;
  int kinks = 0;
  std::string worst;
  json per_family = json::object();
  for (Family& fam : families) {
    int checked = 0;
    double fam_max = 0.0;
    for (Param* p : fam.params) {
      double gmax = 0.0;
      for (double g : p->grad) gmax = std::max(gmax, std::abs(g));
      if (gmax < 1e-12) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < p->grad.size(); ++i)
        if (std::abs(p->grad[i]) >= 1e-3 * gmax) candidates.push_back(i);
      std::shuffle(candidates.begin(), candidates.end(), rng);
      std::size_t accepted = 0;
      for (std::size_t i : candidates) {
        if (accepted == kPerTensor) break;
        const double saved = p->value[i];
        p->value[i] = saved + kStep;
        const double up = compute_patch_loss(field, &sr, rc, pair, false).loss;
        const std::vector<bool> signs_up = relu_signs();
        p->value[i] = saved - kStep;
        const double down = compute_patch_loss(field, &sr, rc, pair, false).loss;
        const std::vector<bool> signs_down = relu_signs();
        p->value[i] = saved;
        if (signs_up != signs_down) {
          ++kinks;
          continue;
        }
        const double numeric = (up - down) / (2.0 * kStep);
        const double analytic = p->grad[i];
        const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
        fam_max = std::max(fam_max, rel);
        if (rel > max_rel) {
          max_rel = rel;
          worst = p->name + "[" + std::to_string(i) + "]";
        }
        ++checked;
        ++accepted;
      }
    }
    per_family[fam.name] = {{"checked", checked}, {"max_rel", fam_max}};
  }
  const double seconds = seconds_since(start);
  Checklist list;
  for (const Family& fam : families)
    list.check(per_family[fam.name]["checked"].get<int>() > 0, fam.name + " entries sampled");
  list.check(max_rel < 1e-3, "relative error < 1e-3");
  list.check(seconds < 60.0, "runtime < 60 s");
  std::string summary = "4^3 rank-2 field, 8x8 LR patch, r=2, step 1e-4:";
  for (const Family& fam : families)
    summary += " " + fam.name + " " + std::to_string(per_family[fam.name]["checked"].get<int>()) +
               " entries max rel " + fmt(per_family[fam.name]["max_rel"].get<double>(), 3) + ";";
  summary += " worst " + worst + "; " + std::to_string(kinks) + " ReLU-crossing stencils resampled; " +
             fmt(seconds, 3) + " s";
  return list.outcome(summary, {{"families", per_family},
                                {"max_rel", max_rel},
                                {"relu_crossings", kinks},
                                {"seconds", seconds}});
}

// ---------------------------------------------------------------------------
// 3. Renderer against the geometric oracle

Outcome renderer_vs_oracle(DeskScale& desk) {
  constexpr int kRatio = 2;
  const WarmupResult& warm = desk.warmup(kRatio, 0);
  const TrainConfig cfg = desk.config(kRatio, Strategy::FTRandPatch, 0);
  // The LR images are box averages of HR renders, which equals the ray
  // tracer at the LR camera with ratio-times finer sub-pixel sampling.
  ToySceneSpec lr_spec = desk.scene().oracle->spec();
  lr_spec.supersample *= kRatio;
  const ToyOracle oracle(lr_spec);
  RenderConfig rc = cfg.render;
  rc.n_samples = cfg.warmup.n_samples;

  std::vector<double> scores;
  double reference_gap = 0.0;
  const SceneDataset& lr = desk.lr(kRatio);
  for (const View& v : lr.test) {
    const Image truth = oracle.render(v.camera);
    for (std::size_t i = 0; i < truth.data.size(); ++i)
      reference_gap = std::max(reference_gap, std::abs(truth.data[i] - v.image.data[i]));
    scores.push_back(psnr(render_image(warm.field, v.camera, rc).rgb, truth));
  }
  const double lo = *std::min_element(scores.begin(), scores.end());
  double mean = 0.0;
  for (double s : scores) mean += s / static_cast<double>(scores.size());
  const int width = lr.test.front().camera.width;
  const int height = lr.test.front().camera.height;

  Checklist list;
  list.check(cfg.warmup.iterations <= 5000, "<= 5000 iterations");
  list.check(width == 100 && height == 100, "100x100 LR views");
  list.check(lo >= 30.0, "every held-out view >= 30 dB");
  list.check(warm.seconds <= 15 * 60.0, "warm-up <= 15 min");
  std::string views;
  for (double s : scores) views += (views.empty() ? "" : "/") + fmt(s, 4);
  return list.outcome(std::to_string(cfg.warmup.iterations) + " iterations at " + std::to_string(width) +
                          "x" + std::to_string(height) + ": held-out PSNR " + views + " dB (mean " +
                          fmt(mean, 4) + ", min " + fmt(lo, 4) + "), warm-up " +
                          fmt(warm.seconds / 60.0, 3) + " min",
                      {{"view_psnr", scores},
                       {"mean_psnr", mean},
                       {"warmup_seconds", warm.seconds},
                       {"reference_vs_dataset_max_abs", reference_gap}});
}

// ---------------------------------------------------------------------------
// 4. SR gain over bilinear

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Outcome sr_gain(DeskScale& desk) {
  std::vector<double> gains, rand_psnr, bil_psnr;
  for (std::uint64_t seed : desk.budget().seeds) {
    const double r = desk.run(2, Strategy::FTRandPatch, seed).mean_psnr;
    const double b = desk.run(2, Strategy::Bilinear, seed).mean_psnr;
    rand_psnr.push_back(r);
    bil_psnr.push_back(b);
    gains.push_back(r - b);
  }
  const double gain = mean_of(gains);
  Checklist list;
  list.check(gain >= 0.5, "mean gain >= 0.5 dB");
  return list.outcome("r=2, " + std::to_string(desk.budget().end_to_end_epochs) + " epochs, " +
                          std::to_string(gains.size()) + " seeds: FT-RandPatch " +
                          fmt(mean_of(rand_psnr), 4) + " dB vs Bilinear " + fmt(mean_of(bil_psnr), 4) +
                          " dB, gain " + fmt(gain, 3) + " dB",
                      {{"ft_randpatch", rand_psnr}, {"bilinear", bil_psnr}, {"mean_gain", gain}});
}

// ---------------------------------------------------------------------------
// 5. Random against grid patches

Outcome random_vs_grid(DeskScale& desk) {
  json metrics;
  std::map<int, double> gap;
  for (int ratio : {2, 4}) {
    std::vector<double> diffs, rand_psnr, grid_psnr;
    for (std::uint64_t seed : desk.budget().seeds) {
      const double r = desk.run(ratio, Strategy::FTRandPatch, seed).mean_psnr;
      const double g = desk.run(ratio, Strategy::FTGridPatch, seed).mean_psnr;
      rand_psnr.push_back(r);
      grid_psnr.push_back(g);
      diffs.push_back(r - g);
    }
    gap[ratio] = mean_of(diffs);
    metrics["r" + std::to_string(ratio)] = {
        {"ft_randpatch", rand_psnr}, {"ft_gridpatch", grid_psnr}, {"mean_gap", gap[ratio]}};
  }
  Checklist list;
  list.check(gap[2] >= 0.0, "r=2 gap >= 0");
  list.check(gap[4] > 0.0, "r=4 gap > 0");
  return list.outcome("Rand - Grid: r=2 " + fmt(gap[2], 3) + " dB, r=4 " + fmt(gap[4], 3) +
                          " dB (r=4 gap " + (gap[4] > gap[2] ? "larger" : "not larger") + ")",
                      metrics);
}

// ---------------------------------------------------------------------------
// 6. Efficiency

Outcome efficiency(DeskScale& desk) {
  std::vector<CameraModel> cameras;
  for (const View& v : desk.hr().test) cameras.push_back(v.camera);

  const WarmupResult& teacher = desk.teacher();
  Pipeline full;
  full.field = &teacher.field;
  full.upscaler = Upscaler::None;
  full.ratio = 1;
  full.render = desk.teacher_config().render;
  const DeskRun& x2 = desk.run(2, Strategy::FTRandPatch, 0);
  const DeskRun& x4 = desk.run(4, Strategy::FTRandPatch, 0);
  const Pipeline p2 = x2.state.pipeline(x2.config.render);
  const Pipeline p4 = x4.state.pipeline(x4.config.render);

  progress("profiling renders");
  const ProfileResult f = profile_render(full, cameras, 3);
  const ProfileResult r2 = profile_render(p2, cameras, 3);
  const ProfileResult r4 = profile_render(p4, cameras, 3);
  const double speedup = f.mean_seconds / r2.mean_seconds;

  Checklist list;
  list.check(f.mean_seconds > r2.mean_seconds, "full > SR-2x time");
  list.check(r2.mean_seconds > r4.mean_seconds, "SR-2x > SR-4x time");
  list.check(speedup >= 2.0, "SR-2x speedup >= 2");
  list.check(r2.total_bytes < f.total_bytes, "SR-2x bytes < full");
  list.check(r4.total_bytes < f.total_bytes, "SR-4x bytes < full");
  auto mb = [](std::size_t b) { return fmt(static_cast<double>(b) / 1e6, 4) + " MB"; };
  return list.outcome("render " + fmt(f.mean_seconds, 3) + " s -> " + fmt(r2.mean_seconds, 3) + " s -> " +
                          fmt(r4.mean_seconds, 3) + " s (SR-2x speedup " + fmt(speedup, 3) +
                          "x); size " + mb(f.total_bytes) + " -> " + mb(r2.total_bytes) + " -> " +
                          mb(r4.total_bytes),
                      {{"seconds", {f.mean_seconds, r2.mean_seconds, r4.mean_seconds}},
                       {"std_seconds", {f.std_seconds, r2.std_seconds, r4.std_seconds}},
                       {"bytes", {f.total_bytes, r2.total_bytes, r4.total_bytes}},
                       {"speedup_x2", speedup}});
}

// ---------------------------------------------------------------------------
// 7. Training-time ordering

Outcome training_time(DeskScale& desk) {
  const DeskRun& d = desk.run(2, Strategy::Distillation, 0);
  const DeskRun& r = desk.run(2, Strategy::FTRandPatch, 0);
  const DeskRun& b = desk.run(2, Strategy::Bilinear, 0);
  const double pseudo = d.state.wall_clock.count("pseudo_data") ? d.state.wall_clock.at("pseudo_data") : 0.0;
  Checklist list;
  list.check(pseudo > 0.0, "pseudo-data time booked");
  list.check(d.train_seconds() > r.train_seconds(), "Distillation > FT-RandPatch");
  list.check(r.train_seconds() > b.train_seconds(), "FT-RandPatch > Bilinear");
  auto m = [](double s) { return fmt(s / 60.0, 3) + " min"; };
  return list.outcome("seed 0, r=2: Distillation " + m(d.train_seconds()) + " (teacher " +
                          m(d.teacher_seconds) + ", pseudo data " + m(pseudo) + ") > FT-RandPatch " +
                          m(r.train_seconds()) + " > Bilinear " + m(b.train_seconds()) +
                          "; each includes the shared warm-up " + m(r.warmup_seconds),
                      {{"distillation", d.train_seconds()},
                       {"ft_randpatch", r.train_seconds()},
                       {"bilinear", b.train_seconds()},
                       {"teacher", d.teacher_seconds},
                       {"pseudo_data", pseudo},
                       {"distillation_psnr", d.mean_psnr}});
}

// ---------------------------------------------------------------------------
// 8. Metric suite

void metric_examples(Checklist& list) {
  const Image half(16, 16, 3, 0.5), zero(16, 16, 3, 0.0), six(16, 16, 3, 0.6);
  const double same = psnr(half, half);
  list.check(std::isinf(same) && same > 0, "psnr(a, a) = +inf");
  list.check(std::abs(psnr(half, six) - 20.0) < 1e-9, "psnr at MSE 0.01 = 20 dB");
  list.check(std::abs(psnr(half, zero) - 10.0 * std::log10(4.0)) < 1e-12 &&
                 std::abs(psnr(half, zero) - 6.0206) < 1e-4,
             "psnr 0.5 vs 0 = 6.0206 dB");

  Rng rng(8);
  Image a(32, 32, 3), b(32, 32, 3);
  for (double& v : a.data) v = uniform01(rng);
  for (double& v : b.data) v = uniform01(rng);
  list.check(std::abs(ssim(a, a) - 1.0) < 1e-12, "ssim(a, a) = 1");
  list.check(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12, "ssim symmetric");
  const double c1 = 0.2, c2 = 0.7, k = 0.01 * 0.01;
  const double closed = (2 * c1 * c2 + k) / (c1 * c1 + c2 * c2 + k);
  list.check(std::abs(ssim(Image(32, 32, 3, c1), Image(32, 32, 3, c2)) - closed) < 1e-9,
             "ssim of constants closed form");
}

void composite_examples(Checklist& list) {
  const Vec3 bg(0.3, 0.6, 0.9);
  const std::vector<double> zeros(8, 0.0), deltas(8, 0.25);
  const std::vector<Vec3> cols(8, Vec3(1, 0, 0));
  const CompositeResult empty = composite(zeros, cols, deltas, 8, bg);
  double wsum = 0.0;
  for (double w : empty.weights) wsum += w;
  list.check(empty.colors[0] == bg && wsum == 0.0, "empty space = background");

  const double ln2 = std::numbers::ln2;
  const std::vector<double> one_sigma{ln2}, one_delta{1.0};
  const std::vector<Vec3> red{Vec3(1, 0, 0)};
  const CompositeResult one = composite(one_sigma, red, one_delta, 1, Vec3::Zero());
  list.check(std::abs(one.weights[0] - 0.5) < 1e-12 && (one.colors[0] - Vec3(0.5, 0, 0)).norm() < 1e-12,
             "one sample at ln 2");

  const std::vector<double> two_sigma{ln2, ln2}, two_delta{1.0, 1.0};
  const std::vector<Vec3> rg{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const CompositeResult two = composite(two_sigma, rg, two_delta, 2, Vec3::Zero());
  list.check(std::abs(two.weights[1] / 0.5 - 0.5) < 1e-12 &&
                 (two.colors[0] - Vec3(0.5, 0.25, 0)).norm() < 1e-12,
             "two samples at ln 2");
}

void upscale_examples(Checklist& list) {
  const Image c(5, 7, 3, 0.37);
  const Image up = bilinear_upscale(c, 4);
  bool constant = up.height == 20 && up.width == 28;
  for (double v : up.data) constant = constant && std::abs(v - 0.37) < 1e-15;
  list.check(constant, "constant -> constant");
  Image r(6, 5, 3);
  Rng rng(3);
  for (double& v : r.data) v = uniform01(rng);
  list.check(bilinear_upscale(r, 1).data == r.data, "ratio 1 identity");
  Image ramp(1, 2, 1);
  ramp.data = {0.0, 1.0};
  const Image u = bilinear_upscale(ramp, 2);
  const std::vector<double> want{0.0, 0.25, 0.75, 1.0};
  bool row_ok = u.width == 4 && u.height == 2;
  for (int y = 0; row_ok && y < u.height; ++y)
    for (int x = 0; x < 4; ++x) row_ok = row_ok && std::abs(u(y, x, 0) - want[x]) < 1e-15;
  list.check(row_ok, "(0, 1) x2 -> (0, 0.25, 0.75, 1)");
}

void grid_examples(Checklist& list) {
  auto origins = [](const std::vector<PatchSpec>& ps) {
    std::set<int> rows, cols;
    for (const auto& p : ps) {
      rows.insert(p.row);
      cols.insert(p.col);
    }
    return std::make_pair(rows, cols);
  };
  const auto g512 = grid_patches(512, 512, 256);
  list.check(g512.size() == 4 && origins(g512).first == std::set<int>{0, 256} &&
                 origins(g512).second == std::set<int>{0, 256},
             "512/256 -> 4 patches");
  const auto g800 = grid_patches(800, 800, 256);
  const std::set<int> want{0, 256, 512, 544};
  std::vector<char> covered(800 * 800, 0);
  for (const auto& p : g800)
    for (int y = p.row; y < p.row + 256; ++y)
      for (int x = p.col; x < p.col + 256; ++x) covered[y * 800 + x] = 1;
  list.check(g800.size() == 16 && origins(g800).first == want && origins(g800).second == want &&
                 std::all_of(covered.begin(), covered.end(), [](char c) { return c != 0; }),
             "800/256 -> 16 patches covering every pixel");
  const auto single = grid_patches(64, 64, 64);
  list.check(single.size() == 1 && single[0].row == 0 && single[0].col == 0, "H=W=P -> (0, 0)");
}

/// Returns a description of the literal 800/256 example for the report.
std::string random_patch_examples(Checklist& list, json& metrics) {
  Rng degenerate(1);
  bool zero = true;
  for (int i = 0; i < 1000; ++i) {
    const PatchSpec p = random_patch(64, 64, 64, degenerate);
    zero = zero && p.row == 0 && p.col == 0;
  }
  list.check(zero, "P=H=W -> (0, 0)");
  Rng s1(77), s2(77);
  bool same = true;
  for (int i = 0; i < 1000; ++i) {
    const PatchSpec a = random_patch(800, 800, 256, s1), b = random_patch(800, 800, 256, s2);
    same = same && a.row == b.row && a.col == b.col;
  }
  list.check(same, "identical seeds -> identical origins");

  constexpr int kSide = 800, kPatch = 256, kDraws = 100000;
  constexpr int kOrigins = kSide - kPatch + 1;
  std::vector<int> counts(static_cast<std::size_t>(kOrigins) * kOrigins, 0);
  std::vector<int> row_marginal(kOrigins, 0), col_marginal(kOrigins, 0);
  std::vector<std::int64_t> diff(static_cast<std::size_t>(kSide + 1) * (kSide + 1), 0);
  Rng rng(20260417);
  for (int i = 0; i < kDraws; ++i) {
    const PatchSpec p = random_patch(kSide, kSide, kPatch, rng);
    ++counts[static_cast<std::size_t>(p.row) * kOrigins + p.col];
    ++row_marginal[p.row];
    ++col_marginal[p.col];
    auto at = [&](int y, int x) -> std::int64_t& { return diff[static_cast<std::size_t>(y) * (kSide + 1) + x]; };
    ++at(p.row, p.col);
    --at(p.row + kPatch, p.col);
    --at(p.row, p.col + kPatch);
    ++at(p.row + kPatch, p.col + kPatch);
  }
  // 2-D prefix sum of the difference array gives per-pixel coverage.
  int uncovered = 0;
  std::vector<std::int64_t> acc(static_cast<std::size_t>(kSide + 1) * (kSide + 1), 0);
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * (kSide + 1) + x;
      std::int64_t v = diff[i];
      if (y > 0) v += acc[i - (kSide + 1)];
      if (x > 0) v += acc[i - 1];
      if (y > 0 && x > 0) v -= acc[i - (kSide + 1) - 1];
      acc[i] = v;
      if (v == 0) ++uncovered;
    }
  const double p_origin = 1.0 / (static_cast<double>(kOrigins) * kOrigins);
  const double expected = kDraws * p_origin;
  const double sigma = std::sqrt(kDraws * p_origin * (1.0 - p_origin));
  int outliers = 0;
  for (int c : counts)
    if (std::abs(c - expected) > 5.0 * sigma) ++outliers;
  list.check(uncovered == 0, "800/256: every pixel covered (" + std::to_string(uncovered) + " uncovered)");
  list.check(outliers == 0, "800/256: every origin within 5 sigma (" + std::to_string(outliers) +
                                " outside, expected " + fmt(expected, 3) + " per origin)");

  // Chi-square at significance 1e-4 on each axis marginal and on 5 x 5
  // blocks of 109 x 109 origins, where expected counts are large.
  auto chi2 = [](const std::vector<int>& observed, double expected_each) {
    double s = 0.0;
    for (int o : observed) s += (o - expected_each) * (o - expected_each) / expected_each;
    return s;
  };
  auto critical = [](std::size_t bins) {
    return boost::math::quantile(boost::math::complement(
        boost::math::chi_squared(static_cast<double>(bins - 1)), 1e-4));
  };
  constexpr int kBlocks = 5, kBlock = kOrigins / kBlocks;
  std::vector<int> blocks(kBlocks * kBlocks, 0);
  for (int y = 0; y < kOrigins; ++y)
    for (int x = 0; x < kOrigins; ++x)
      blocks[(y / kBlock) * kBlocks + x / kBlock] += counts[static_cast<std::size_t>(y) * kOrigins + x];
  const double marginal_expected = static_cast<double>(kDraws) / kOrigins;
  const double chi_rows = chi2(row_marginal, marginal_expected);
  const double chi_cols = chi2(col_marginal, marginal_expected);
  const double chi_blocks = chi2(blocks, static_cast<double>(kDraws) / (kBlocks * kBlocks));
  list.check(chi_rows < critical(kOrigins), "row-origin chi-square");
  list.check(chi_cols < critical(kOrigins), "column-origin chi-square");
  list.check(chi_blocks < critical(blocks.size()), "block chi-square");
  metrics["random_patch"] = {{"uncovered_pixels", uncovered},
                             {"origins_outside_5_sigma", outliers},
                             {"expected_per_origin", expected},
                             {"chi2_rows", chi_rows},
                             {"chi2_cols", chi_cols},
                             {"chi2_blocks", chi_blocks},
                             {"chi2_critical_axis", critical(kOrigins)},
                             {"chi2_critical_blocks", critical(blocks.size())}};
  return "random_patch 800/256 x 1e5: " + std::to_string(uncovered) + " uncovered pixels, " +
         std::to_string(outliers) + " origins beyond 5 sigma (" + fmt(expected, 3) +
         " draws expected per origin); chi-square rows " + fmt(chi_rows, 4) + ", cols " + fmt(chi_cols, 4) +
         " (critical " + fmt(critical(kOrigins), 4) + "), blocks " + fmt(chi_blocks, 4) + " (critical " +
         fmt(critical(blocks.size()), 4) + ")";
}

Outcome metric_suite() {
  const auto start = Clock::now();
  Checklist list;
  json metrics;
  metric_examples(list);
  composite_examples(list);
  upscale_examples(list);
  grid_examples(list);
  const std::string random_note = random_patch_examples(list, metrics);
  const double seconds = seconds_since(start);
  list.check(seconds < 60.0, "runtime < 60 s");
  metrics["seconds"] = seconds;
  return list.outcome(random_note + "; " + fmt(seconds, 3) + " s", metrics);
}

// ---------------------------------------------------------------------------
// 9. Reproducibility

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string report_json(const DeskScale& desk, const DeskRun& run) {
  const std::vector<Image> renders = desk.test_renders(run);
  std::vector<Image> truth;
  std::vector<std::string> names;
  for (const View& v : desk.hr().test) {
    truth.push_back(v.image);
    names.push_back(v.name);
  }
  MethodResult m;
  m.scene = desk.hr().name;
  m.method = to_string(run.config.strategy);
  m.views = evaluate_views(renders, truth, names);
  m.field_bytes = run.state.field->size_bytes();
  m.sr_bytes = run.state.sr ? run.state.sr->size_bytes() : 0;
  m.config_fingerprint = config_fingerprint(run.config);
  EvalReport report = build_report({m});
  report.include_timing = false;
  return report.json();
}

Outcome reproducibility(DeskScale& desk) {
  TempDir dir;
  const DeskRun& first = desk.run(2, Strategy::FTRandPatch, 0);
  const DeskRun second = desk.fresh_run(2, Strategy::FTRandPatch, 0);
  save_model(dir.path() / "a.ckpt", first.state, first.config);
  save_model(dir.path() / "b.ckpt", second.state, second.config);
  const std::string a = read_bytes(dir.path() / "a.ckpt");
  const std::string b = read_bytes(dir.path() / "b.ckpt");
  const std::string ra = report_json(desk, first), rb = report_json(desk, second);
  Checklist list;
  list.check(!a.empty() && a == b, "final checkpoints bitwise equal");
  list.check(ra == rb, "EvalReports identical");
  list.check(first.state.loss_history == second.state.loss_history, "loss curves identical");
  return list.outcome("two FT-RandPatch runs (warm-up + " + std::to_string(first.config.epochs) +
                          " epochs, seed 0): checkpoints " + std::to_string(a.size()) + " bytes " +
                          (a == b ? "identical" : "differ") + ", reports " + (ra == rb ? "identical" : "differ"),
                      {{"checkpoint_bytes", a.size()}, {"report", json::parse(ra)}});
}

// ---------------------------------------------------------------------------
// 10. Format fidelity

json identity_pose() {
  return json::array({json::array({1, 0, 0, 0}), json::array({0, 1, 0, 0}), json::array({0, 0, 1, 4}),
                      json::array({0, 0, 0, 1})});
}

void write_transforms(const fs::path& root, const std::string& split, double angle,
                      const std::vector<std::string>& files) {
  json meta{{"camera_angle_x", angle}, {"frames", json::array()}};
  for (const auto& f : files) meta["frames"].push_back({{"file_path", f}, {"transform_matrix", identity_pose()}});
  std::ofstream(root / ("transforms_" + split + ".json")) << meta.dump();
}

void write_llff(const fs::path& root, int n, int full_h, int full_w, double focal, const std::string& image_dir,
                int image_h, int image_w) {
  fs::create_directories(root / image_dir);
  NpyArray pb{{n, 17}, {}};
  for (int i = 0; i < n; ++i) {
    const double a = 0.05 * i;
    const Vec3 down(0, -1, 0), right(std::cos(a), 0, -std::sin(a)), back(std::sin(a), 0, std::cos(a));
    const Vec3 pos(0.1 * i, 0.02 * i, 0.0);
    for (int r = 0; r < 3; ++r) {
      pb.data.insert(pb.data.end(), {down[r], right[r], back[r], pos[r]});
      pb.data.push_back(r == 0 ? full_h : r == 1 ? full_w : focal);
    }
    pb.data.push_back(1.5 + 0.1 * i);
    pb.data.push_back(20.0 + i);
    char name[32];
    std::snprintf(name, sizeof(name), "IMG_%04d.png", i);
    write_png(root / image_dir / name, Image(image_h, image_w, 3, 0.1 * (i % 8)));
  }
  write_npy(root / "poses_bounds.npy", pb);
}

template <typename E, typename F>
bool throws(F&& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome format_fidelity() {
  Checklist list;
  {
    TempDir dir;
    write_png(dir.path() / "r_0.png", Image(800, 800, 3, 0.5));
    write_transforms(dir.path(), "train", std::numbers::pi / 2, {"./r_0"});
    write_transforms(dir.path(), "test", std::numbers::pi / 2, {"./r_0"});
    const SceneDataset ds = load_blender(dir.path());
    list.check(ds.train.size() == 1 && std::abs(ds.train[0].camera.focal_x - 400.0) < 1e-9,
               "Blender focal 400 at pi/2, W=800");
  }
  {
    TempDir dir;
    Image rgba(8, 8, 4, 0.3);
    for (std::size_t p = 0; p < rgba.pixel_count(); ++p) rgba.data[4 * p + 3] = 0.0;
    write_png(dir.path() / "a.png", rgba);
    write_transforms(dir.path(), "train", 0.7, {"a"});
    write_transforms(dir.path(), "test", 0.7, {"a"});
    const SceneDataset ds = load_blender(dir.path(), Vec3::Ones());
    list.check(std::all_of(ds.train[0].image.data.begin(), ds.train[0].image.data.end(),
                           [](double v) { return v == 1.0; }),
               "Blender alpha 0 on white -> white");
  }
  {
    TempDir dir;
    write_png(dir.path() / "img.png", Image(4, 4, 3, 0.2));
    write_transforms(dir.path(), "train", 0.7, std::vector<std::string>(100, "./img"));
    write_transforms(dir.path(), "test", 0.7, std::vector<std::string>(200, "./img"));
    const SceneDataset ds = load_blender(dir.path());
    list.check(ds.train.size() == 100 && ds.test.size() == 200, "Blender 100/200 split");
  }
  {
    TempDir dir;
    write_llff(dir.path(), 16, 48, 64, 50.0, "images_4", 12, 16);
    const SceneDataset ds = load_llff(dir.path());
    list.check(ds.train.size() == 14 && ds.test.size() == 2 && ds.test[0].name == "IMG_0000" &&
                   ds.test[1].name == "IMG_0008",
               "LLFF 16 rows -> 14/2");
  }
  {
    TempDir dir;
    write_llff(dir.path(), 8, 3024, 4032, 3260.0, "images", 3024, 4032);
    const SceneDataset ds = load_llff(dir.path());
    list.check(ds.train[0].camera.width == 1008 && ds.train[0].image.width == 1008 &&
                   ds.train[0].camera.height == 756,
               "LLFF 4032-wide originals / 4 -> 1008");
    write_npy(dir.path() / "poses_bounds.npy", NpyArray{{8, 15}, Buffer(120, 1.0)});
    list.check(throws<FormatError>([&] { load_llff(dir.path()); }), "LLFF rows of 15 rejected");
  }
  {
    TempDir dir;
    FieldConfig fc;
    fc.resolution = {9, 7, 5};
    fc.density_affine = true;
    const RadianceField field(fc, 5);
    SRConfig sc;
    sc.ratio = 4;
    sc.n_blocks = 2;
    sc.n_channels = 8;
    const SRNetwork sr(sc, 6);
    save_model(dir.path() / "m.ckpt", field, &sr, 4, "{}");
    const Model back = load_model(dir.path() / "m.ckpt");
    bool equal = back.sr != nullptr;
    const auto fa = field.parameters(), fb = back.field.parameters();
    equal = equal && fa.size() == fb.size();
    for (std::size_t i = 0; equal && i < fa.size(); ++i) equal = fa[i]->value == fb[i]->value;
    const auto sa = sr.parameters();
    const auto sb = std::as_const(*back.sr).parameters();
    equal = equal && sa.size() == sb.size();
    for (std::size_t i = 0; equal && i < sa.size(); ++i) equal = sa[i]->value == sb[i]->value;
    save_model(dir.path() / "m2.ckpt", back.field, back.sr.get(), back.ratio, back.config_json);
    list.check(equal, "checkpoint parameters bitwise after load");
    list.check(read_bytes(dir.path() / "m.ckpt") == read_bytes(dir.path() / "m2.ckpt"),
               "checkpoint file bitwise after save-load-save");
  }
  return list.outcome("Blender focal/alpha/split, LLFF split/downsample/N x 17, checkpoint round trip");
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace nerfsr::acceptance

int main(int argc, char** argv) {
  using namespace nerfsr::acceptance;
  CLI::App app{"nerfsr acceptance criteria"};
  std::vector<int> only, known;
  std::string results_path;
  DeskBudget budget;
  app.add_option("--only", only, "Criterion ids to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--known-failures", known, "Criteria whose failure is analysed and expected");
  app.add_option("--results", results_path, "Write a JSON summary here");
  app.add_option("--warmup-iters", budget.warmup_iterations, "Warm-up iterations of the desk protocol");
  app.add_option("--epochs", budget.end_to_end_epochs, "End-to-end epochs of the desk protocol");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<DeskScale> desk_ptr;
  auto desk = [&]() -> DeskScale& {
    if (!desk_ptr) {
      progress("generating the toy scene");
      desk_ptr = std::make_unique<DeskScale>(budget);
    }
    return *desk_ptr;
  };
  const std::vector<Criterion> criteria{
      {1, "compositing oracle", compositing_oracle},
      {2, "gradient fidelity", gradient_fidelity},
      {3, "renderer vs oracle", [&] { return renderer_vs_oracle(desk()); }},
      {4, "SR gain over bilinear", [&] { return sr_gain(desk()); }},
      {5, "random vs grid patches", [&] { return random_vs_grid(desk()); }},
      {6, "efficiency", [&] { return efficiency(desk()); }},
      {7, "training-time ordering", [&] { return training_time(desk()); }},
      {8, "metric unit suite", metric_suite},
      {9, "reproducibility", [&] { return reproducibility(desk()); }},
      {10, "format fidelity", format_fidelity},
  };

  const std::set<int> selected(only.begin(), only.end()), expected(known.begin(), known.end());
  nlohmann::json results = nlohmann::json::array();
  int unexpected = 0, passed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    progress("criterion " + std::to_string(c.id) + ": " + c.name);
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double seconds = seconds_since(start);
    const bool known_failure = expected.count(c.id) > 0;
    ++ran;
    if (o.pass) ++passed;
    if (o.pass == known_failure) ++unexpected;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
              << (known_failure && !o.pass ? " (known failure)" : "")
              << (known_failure && o.pass ? " (listed as a known failure but passed)" : "") << std::endl;
    results.push_back({{"id", c.id},
                       {"name", c.name},
                       {"pass", o.pass},
                       {"known_failure", known_failure},
                       {"detail", o.detail},
                       {"seconds", seconds},
                       {"metrics", o.metrics}});
  }
  std::cout << passed << "/" << ran << " criteria passed" << std::endl;
  if (!results_path.empty()) std::ofstream(results_path) << results.dump(2) << "\n";
  return unexpected == 0 ? 0 : 1;
}
