// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

namespace nerfsr {
namespace {

void check_ratio(int ratio) {
  if (ratio < 1) throw ShapeError("resampling ratio must be >= 1, got " + std::to_string(ratio));
}

}  // namespace

ResampleTaps upscale_taps(int input_size, int ratio) {
  check_ratio(ratio);
  if (input_size < 1) throw ShapeError("cannot upscale an empty axis");
  ResampleTaps taps;
  taps.input_size = input_size;
  taps.output_size = input_size * ratio;
  taps.start.reserve(taps.output_size + 1);
  for (int out = 0; out < taps.output_size; ++out) {
    taps.start.push_back(static_cast<int>(taps.index.size()));
    double x = (out + 0.5) / ratio - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(input_size - 1));
    const int i0 = std::min(static_cast<int>(std::floor(x)), input_size - 1);
    const int i1 = std::min(i0 + 1, input_size - 1);
    const double f = x - i0;
    if (i1 == i0 || f == 0.0) {
      taps.index.push_back(i0);
      taps.weight.push_back(1.0);
    } else {
      taps.index.push_back(i0);
      taps.weight.push_back(1.0 - f);
      taps.index.push_back(i1);
      taps.weight.push_back(f);
    }
  }
  taps.start.push_back(static_cast<int>(taps.index.size()));
  return taps;
}

ResampleTaps downscale_taps(int input_size, int ratio) {
  check_ratio(ratio);
  if (input_size % ratio != 0)
    throw ShapeError("size " + std::to_string(input_size) + " is not divisible by ratio " +
                     std::to_string(ratio));
  ResampleTaps taps;
  taps.input_size = input_size;
  taps.output_size = input_size / ratio;
  taps.start.reserve(taps.output_size + 1);
  const double w = 1.0 / ratio;
  for (int out = 0; out < taps.output_size; ++out) {
    taps.start.push_back(static_cast<int>(taps.index.size()));
    for (int i = out * ratio; i < (out + 1) * ratio; ++i) {
      taps.index.push_back(i);
      taps.weight.push_back(w);
    }
  }
  taps.start.push_back(static_cast<int>(taps.index.size()));
  return taps;
}

Image resample(const Image& image, const ResampleTaps& rows, const ResampleTaps& cols) {
  if (image.height != rows.input_size || image.width != cols.input_size)
    throw ShapeError("resample: image does not match operator input size");
  const int c = image.channels;
  // Columns first, then rows.
  Image tmp(image.height, cols.output_size, c);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < cols.output_size; ++x) {
      for (int k = cols.start[x]; k < cols.start[x + 1]; ++k) {
        const double w = cols.weight[k];
        const int sx = cols.index[k];
        for (int ch = 0; ch < c; ++ch) tmp(y, x, ch) += w * image(y, sx, ch);
      }
    }
  }
  Image out(rows.output_size, cols.output_size, c);
  for (int y = 0; y < rows.output_size; ++y) {
    for (int k = rows.start[y]; k < rows.start[y + 1]; ++k) {
      const double w = rows.weight[k];
      const int sy = rows.index[k];
      for (int x = 0; x < cols.output_size; ++x)
        for (int ch = 0; ch < c; ++ch) out(y, x, ch) += w * tmp(sy, x, ch);
    }
  }
  return out;
}

Image resample_adjoint(const Image& grad, const ResampleTaps& rows, const ResampleTaps& cols) {
  if (grad.height != rows.output_size || grad.width != cols.output_size)
    throw ShapeError("resample_adjoint: gradient does not match operator output size");
  const int c = grad.channels;
  Image tmp(rows.input_size, cols.output_size, c);
  for (int y = 0; y < rows.output_size; ++y) {
    for (int k = rows.start[y]; k < rows.start[y + 1]; ++k) {
      const double w = rows.weight[k];
      const int sy = rows.index[k];
      for (int x = 0; x < cols.output_size; ++x)
        for (int ch = 0; ch < c; ++ch) tmp(sy, x, ch) += w * grad(y, x, ch);
    }
  }
  Image out(rows.input_size, cols.input_size, c);
  for (int y = 0; y < rows.input_size; ++y) {
    for (int x = 0; x < cols.output_size; ++x) {
      for (int k = cols.start[x]; k < cols.start[x + 1]; ++k) {
        const double w = cols.weight[k];
        const int sx = cols.index[k];
        for (int ch = 0; ch < c; ++ch) out(y, sx, ch) += w * tmp(y, x, ch);
      }
    }
  }
  return out;
}

Image bilinear_upscale(const Image& image, int ratio) {
  check_ratio(ratio);
  if (ratio == 1) return image;
  return resample(image, upscale_taps(image.height, ratio), upscale_taps(image.width, ratio));
}

Image bilinear_upscale_backward(const Image& grad_hr, int ratio) {
  check_ratio(ratio);
  if (ratio == 1) return grad_hr;
  if (grad_hr.height % ratio != 0 || grad_hr.width % ratio != 0)
    throw ShapeError("bilinear_upscale_backward: gradient size not divisible by ratio");
  return resample_adjoint(grad_hr, upscale_taps(grad_hr.height / ratio, ratio),
                          upscale_taps(grad_hr.width / ratio, ratio));
}

Image bilinear_downsample(const Image& image, int ratio) {
  check_ratio(ratio);
  if (image.height % ratio != 0 || image.width % ratio != 0)
    throw ShapeError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     " is not divisible by ratio " + std::to_string(ratio));
  if (ratio == 1) return image;
  return resample(image, downscale_taps(image.height, ratio), downscale_taps(image.width, ratio));
}

double sample_bilinear(const Image& image, double x, double y, int channel) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), image.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * image(y0, x0, channel) + fx * image(y0, x1, channel);
  const double bottom = (1.0 - fx) * image(y1, x0, channel) + fx * image(y1, x1, channel);
  return (1.0 - fy) * top + fy * bottom;
}

Image crop(const Image& image, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || height < 0 || width < 0 || row + height > image.height ||
      col + width > image.width)
    throw BoundsError("crop window outside image");
  Image out(height, width, image.channels);
  for (int y = 0; y < height; ++y) {
    const double* src = &image.data[(static_cast<std::size_t>(row + y) * image.width + col) *
                                    image.channels];
    std::copy(src, src + static_cast<std::size_t>(width) * image.channels,
              &out.data[static_cast<std::size_t>(y) * width * image.channels]);
  }
  return out;
}

std::array<double, 3> channel_means(std::span<const Image> images) {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const auto& img : images) {
    if (img.channels < 3) throw ShapeError("channel_means expects RGB images");
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) sum[c] += img.data[p * img.channels + c];
    count += static_cast<double>(img.pixel_count());
  }
  if (count == 0.0) return {0.5, 0.5, 0.5};
  return {sum[0] / count, sum[1] / count, sum[2] / count};
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw FormatError("cannot read PNG " + path.string() + ": " + png.message);
  const bool has_alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  const int channels = has_alpha ? 4 : 3;
  Image out(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr))
    throw FormatError("cannot decode PNG " + path.string() + ": " + png.message);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 4)
    throw ShapeError("write_png expects 3 or 4 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 4 ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    buffer[i] = static_cast<png_byte>(std::lround(255.0 * std::clamp(image.data[i], 0.0, 1.0)));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr))
    throw FormatError("cannot write PNG " + path.string() + ": " + png.message);
}

Image quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = std::lround(255.0 * std::clamp(v, 0.0, 1.0)) / 255.0;
  return out;
}

Image composite_alpha(const Image& rgba, const Vec3& background) {
  if (rgba.channels == 3) return rgba;
  if (rgba.channels != 4) throw ShapeError("composite_alpha expects RGB or RGBA");
  Image out(rgba.height, rgba.width, 3);
  for (std::size_t p = 0; p < rgba.pixel_count(); ++p) {
    const double a = rgba.data[p * 4 + 3];
    for (int c = 0; c < 3; ++c)
      out.data[p * 3 + c] = rgba.data[p * 4 + c] * a + background[c] * (1.0 - a);
  }
  return out;
}

}  // namespace nerfsr
