// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "nerfsr/common.hpp"

namespace nerfsr {

/// Sparse 1-D resampling operator: output i = sum_k weight[k] * input[index[k]]
/// for k in [start[i], start[i + 1]).
struct ResampleTaps {
  int input_size = 0;
  int output_size = 0;
  std::vector<int> start;
  std::vector<int> index;
  std::vector<double> weight;
};

/// Bilinear magnification by an integer ratio. Output pixel X samples the input
/// at (X + 0.5) / ratio - 0.5, clamped to the edge pixels.
ResampleTaps upscale_taps(int input_size, int ratio);

/// Area minification: output pixel u averages input pixels [u r, u r + r),
/// centred on input coordinate (u + 0.5) * ratio - 0.5. At ratio 2 this is
/// exactly bilinear interpolation at the output pixel centres.
ResampleTaps downscale_taps(int input_size, int ratio);

/// Applies row and column operators separably to every channel.
Image resample(const Image& image, const ResampleTaps& rows, const ResampleTaps& cols);

/// Adjoint of resample(): maps an output-space gradient back to the input grid.
Image resample_adjoint(const Image& grad, const ResampleTaps& rows, const ResampleTaps& cols);

Image bilinear_upscale(const Image& image, int ratio);
Image bilinear_upscale_backward(const Image& grad_hr, int ratio);

/// Area-consistent bilinear downsampling; throws ShapeError when a dimension is
/// not divisible by `ratio`.
Image bilinear_downsample(const Image& image, int ratio);

/// Bilinear lookup at continuous pixel-index coordinates (pixel i centred at i),
/// clamped to the image border.
double sample_bilinear(const Image& image, double x, double y, int channel);

Image crop(const Image& image, int row, int col, int height, int width);

std::array<double, 3> channel_means(std::span<const Image> images);

/// Reads an 8- or 16-bit PNG into [0, 1]. Gray inputs expand to RGB; alpha is
/// kept as a fourth channel when present.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit RGB(A): value = round(255 * clamp(v, 0, 1)).
void write_png(const std::filesystem::path& path, const Image& image);

/// The values write_png() would store, mapped back to [0, 1].
Image quantize8(const Image& image);

/// Composites an RGBA image onto a constant background; RGB images pass through.
Image composite_alpha(const Image& rgba, const Vec3& background);

}  // namespace nerfsr
