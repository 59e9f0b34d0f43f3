// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nerfsr/common.hpp"
#include "nerfsr/pipeline.hpp"

namespace nerfsr {

/// Tables cap infinite PSNR (identical images) at this value.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over the valid region of Gaussian-weighted windows, computed on
/// the channel-mean grey image. Throws ShapeError if the image is smaller
/// than the window.
double ssim(const Image& a, const Image& b, int window = 11, double sigma = 1.5, double k1 = 0.01,
            double k2 = 0.03, double peak = 1.0);

struct PerceptualResult {
  bool available = false;
  double value = 0.0;
  std::string status;
};

/// Learned perceptual distance from a feature network stored as an archive
/// (kind "perceptual"). Missing weights yield available = false, never a number.
PerceptualResult perceptual_distance(const Image& a, const Image& b,
                                     const std::filesystem::path& weights_path);

struct ProfileResult {
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::size_t field_bytes = 0;
  std::size_t sr_bytes = 0;
  std::size_t total_bytes = 0;
  int frames = 0;
};

/// Times render_pipeline over repeats x cameras after one untimed warm-up
/// render. Parameters are never modified.
ProfileResult profile_render(const Pipeline& pipeline, std::span<const CameraModel> cameras,
                             int repeats = 3);

struct ViewMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> perceptual;
};

struct MethodResult {
  std::string scene;
  std::string method;
  std::vector<ViewMetrics> views;
  double render_seconds = 0.0;
  double train_seconds = -1.0;  // negative when unknown
  std::size_t field_bytes = 0;
  std::size_t sr_bytes = 0;
  std::uint64_t config_fingerprint = 0;
  std::string perceptual_status = "unavailable";
  std::string device = "cpu";

  double mean_psnr() const;  // per-view mean, capped
  double mean_ssim() const;
  std::optional<double> mean_perceptual() const;
};

/// Per-view metrics of renders against ground truth (matched by index).
std::vector<ViewMetrics> evaluate_views(std::span<const Image> renders,
                                        std::span<const Image> ground_truth,
                                        std::span<const std::string> names);

struct EvalReport {
  std::vector<MethodResult> rows;
  std::string averaging = "per-view mean";
  /// Wall-clock columns vary between runs; without them the report is a
  /// deterministic function of the renders.
  bool include_timing = true;

  /// Aligned plain-text table, PSNR rounded to 2 decimals.
  std::string table() const;
  /// Machine-readable twin with full precision.
  std::string json() const;
};

EvalReport build_report(std::vector<MethodResult> results);

}  // namespace nerfsr
