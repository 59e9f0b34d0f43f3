// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "nerfsr/field.hpp"
#include "nerfsr/renderer.hpp"
#include "nerfsr/sampling.hpp"
#include "nerfsr/sr.hpp"

namespace nerfsr {

inline constexpr int kTrainConfigSchemaVersion = 1;

enum class Strategy { Bilinear, Pretrained, Scratch, FTGridPatch, FTRandPatch, Distillation };

std::string to_string(Strategy strategy);
/// Accepts the canonical names (case-insensitive); throws ConfigError
/// listing the six valid strategies otherwise.
Strategy parse_strategy(const std::string& name);
const std::vector<std::string>& strategy_names();

/// True when the strategy optimizes SR parameters end to end.
bool trains_sr(Strategy strategy);
/// True when the strategy starts from pretrained SR weights.
bool uses_pretrained_sr(Strategy strategy);
/// True when the strategy draws patches with random_patch.
bool uses_random_patches(Strategy strategy);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct WarmupConfig {
  int iterations = 5000;
  int batch_rays = 1024;
  double lr_grid = 0.02;
  double lr_network = 1e-3;
  /// Learning rates decay exponentially to this fraction over the warm-up.
  double lr_decay_target = 0.1;
  /// Iterations at which the grids are upsampled (optimizer state and rates reset).
  std::vector<int> upsample_iters{1000, 2000, 3000};
  std::array<int, 3> final_resolution{128, 128, 128};
  int n_samples = 96;
};

struct TrainConfig {
  int schema_version = kTrainConfigSchemaVersion;
  Strategy strategy = Strategy::FTRandPatch;
  int ratio = 2;
  /// End-to-end epochs; a negative value selects the default (150, or 100 for
  /// distillation).
  int epochs = -1;
  double learning_rate = 1e-4;
  std::map<int, int> patch_size{{2, 256}, {4, 128}, {8, 128}};
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::string device = "cpu";
  bool augment = false;
  AugmentParams augmentation;
  int checkpoint_every = 10;
  bool validate_best = true;

  WarmupConfig warmup;
  FieldConfig field;
  SRConfig sr;
  RenderConfig render;  // end-to-end and evaluation rendering

  std::string pretrained_sr;       // path to an SR archive
  std::string teacher_checkpoint;  // distillation teacher (HR field)
  int distill_images = 1000;

  int resolved_epochs() const;
  int resolved_patch_size() const;

  /// Every violated constraint, one message per entry.
  std::vector<std::string> problems() const;
  /// Throws ConfigError listing every problem.
  void validate() const;
};

std::string train_config_json(const TrainConfig& config);
/// Applies the keys present in `text` on top of `base`. Unknown keys and
/// schema-version mismatches are errors.
TrainConfig train_config_from_json(const std::string& text, const TrainConfig& base = {});

/// Hash of the serialized config.
std::uint64_t config_fingerprint(const TrainConfig& config);

}  // namespace nerfsr
