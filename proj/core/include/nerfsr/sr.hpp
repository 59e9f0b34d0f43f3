// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nerfsr/checkpoint.hpp"
#include "nerfsr/common.hpp"

namespace nerfsr {

/// Channel-major feature map [channels, height, width].
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  Buffer data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
};

Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const Tensor& tensor);

/// 3x3 convolution, stride 1, reflect padding by one pixel.
/// Weight layout [out, in, 3, 3].
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(const std::string& name, int in_channels, int out_channels);

  void init_uniform(Rng& rng);
  void forward(const Tensor& x, Tensor& y) const;
  /// Accumulates weight and bias gradients; writes d(loss)/dx when dx is non-null.
  void backward(const Tensor& x, const Tensor& dy, Tensor* dx);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Param weight;
  Param bias;

 private:
  int in_ = 0;
  int out_ = 0;
};

/// Sub-pixel rearrangement [C r^2, H, W] -> [C, rH, rW] (channel c*r^2 + i*r + j
/// lands at row offset i, column offset j).
Tensor pixel_shuffle(const Tensor& x, int ratio);
Tensor pixel_unshuffle(const Tensor& y, int ratio);

struct SRConfig {
  int ratio = 2;
  int n_blocks = 8;
  int n_channels = 32;
  double residual_scale = 0.1;
  std::array<double, 3> mean_shift{0.5, 0.5, 0.5};
};

/// Residual convolutional upscaler: head conv, residual blocks
/// (conv-ReLU-conv, scaled), body conv with a global skip, one conv plus
/// x2 pixel shuffle per doubling, and a final conv to RGB. The mean shift is
/// subtracted at the input and added back at the output.
class SRNetwork {
 public:
  SRNetwork() = default;
  /// Throws ConfigError for ratios other than 2, 4 and 8.
  SRNetwork(const SRConfig& config, std::uint64_t seed);

  const SRConfig& config() const { return config_; }
  int ratio() const { return config_.ratio; }
  int stages() const { return static_cast<int>(upsample_.size()); }

  void set_mean_shift(const std::array<double, 3>& mean) { config_.mean_shift = mean; }

  /// Inference. Input must be at least 8x8 and finite.
  Image upscale(const Image& image) const;

  struct Tape {
    Tensor input;  // mean-shifted
    Tensor head;
    std::vector<Tensor> block_in;
    std::vector<Tensor> block_mid;  // pre-ReLU
    Tensor body_in;
    std::vector<Tensor> stage_in;
    Tensor tail_in;
  };
  Image forward(const Image& image, Tape& tape) const;
  /// Accumulates parameter gradients and returns d(loss)/d(input image).
  Image backward(const Tape& tape, const Image& grad_output);

  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  std::size_t parameter_count() const;
  std::size_t size_bytes() const { return parameter_count() * sizeof(double); }
  void zero_grad();

  void save(Archive& archive, const std::string& prefix = "sr.") const;
  static SRNetwork load(const Archive& archive, const std::string& prefix = "sr.");

 private:
  SRConfig config_;
  Conv3x3 head_;
  std::vector<std::array<Conv3x3, 2>> blocks_;
  Conv3x3 body_;
  std::vector<Conv3x3> upsample_;
  Conv3x3 tail_;
};

struct PretrainedLoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> skipped;
};

/// Replaces parameters with those of a saved SR archive. In strict mode every
/// parameter must be present with a matching shape, and the first mismatch is
/// reported by name. Otherwise matching arrays are copied and the rest keep
/// their values. The mean shift is taken from the archive when present.
PretrainedLoadReport load_pretrained(SRNetwork& net, const std::filesystem::path& path, bool strict);
PretrainedLoadReport load_pretrained(SRNetwork& net, const Archive& archive, bool strict);

/// Maps externally named arrays onto SRNetwork parameter names.
/// Patterns may contain "{i}" which matches a decimal index.
struct NameTable {
  struct Rule {
    std::string source;
    std::string target;
  };
  std::vector<Rule> rules;
  /// Value range of the source network's inputs; biases are divided by it.
  double input_range = 1.0;
  /// Channel means used by the source network, in [0, 1].
  std::array<double, 3> mean{0.5, 0.5, 0.5};

  static NameTable read(const std::filesystem::path& path);
  /// Target name for `source`, or empty when no rule matches.
  std::string translate(const std::string& source) const;
};

/// Builds an SR archive from arrays exported by another implementation
/// (for instance a directory of .npy files named after the source arrays).
Archive import_named_arrays(const std::map<std::string, NpyArray>& arrays, const NameTable& table,
                            const SRConfig& config);

/// Reads every *.npy file in `dir` keyed by file stem.
std::map<std::string, NpyArray> read_npy_dir(const std::filesystem::path& dir);

}  // namespace nerfsr
