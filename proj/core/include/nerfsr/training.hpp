// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nerfsr/data.hpp"
#include "nerfsr/pipeline.hpp"
#include "nerfsr/train_config.hpp"

namespace nerfsr {

/// Adam with per-group learning rates and bias correction.
class Adam {
 public:
  struct Group {
    std::string name;
    double lr = 0.0;
    std::vector<Param*> params;
    std::vector<Buffer> m;
    std::vector<Buffer> v;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void add_group(std::string name, std::vector<Param*> params, double lr);
  /// One update from the accumulated gradients of every group.
  void step();
  void zero_grad();
  /// Clears moments and the step counter.
  void reset();

  void set_lr(double lr);
  void scale_lr(double factor);
  const std::vector<Group>& groups() const { return groups_; }
  Group* group(const std::string& name);
  bool contains(const Param* p) const;
  std::int64_t steps() const { return steps_; }

  void save(Archive& archive, const std::string& prefix = "optim.") const;
  /// Restores moments for the already registered groups.
  void load(const Archive& archive, const std::string& prefix = "optim.");

 private:
  AdamConfig config_;
  std::vector<Group> groups_;
  std::int64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Warm-up of the backbone at LR.

struct WarmupRecord {
  int iteration = 0;
  double loss = 0.0;
  double lr_grid = 0.0;
  std::array<int, 3> resolution{};
};

struct WarmupOptions {
  /// Called every `log_every` iterations and on the last one.
  std::function<void(const WarmupRecord&)> on_log;
  int log_every = 100;
  /// Where the field is written when the loss diverges (empty: no dump).
  std::filesystem::path dump_path;
};

struct WarmupResult {
  RadianceField field;
  std::vector<double> loss;  // per iteration
  double seconds = 0.0;
};

/// Grid resolutions after each upsampling step, interpolated geometrically
/// from the field's initial resolution to `final_resolution`.
std::vector<std::array<int, 3>> upsample_schedule(const std::array<int, 3>& initial,
                                                  const std::array<int, 3>& final_resolution,
                                                  std::size_t steps);

/// Trains `field` on random ray batches drawn from every training view of
/// `lr_dataset` (images already at LR). Throws NumericError if the loss
/// becomes non-finite.
WarmupResult warmup_backbone(RadianceField field, const SceneDataset& lr_dataset,
                             const TrainConfig& config, const WarmupOptions& options = {});

/// Field configuration of a backbone rendering HR directly: grids `ratio`
/// times finer per axis.
FieldConfig full_resolution_field(const FieldConfig& lr_field, int ratio);
/// Warm-up settings for that backbone: final resolution scaled by `ratio`
/// and twice the samples per ray.
TrainConfig full_resolution_config(const TrainConfig& config);

// ---------------------------------------------------------------------------
// End-to-end training.

struct PatchLoss {
  double loss = 0.0;
  Image lr_render;
  Image prediction;
};

/// Renders the pair's LR rays, upscales them (with `sr`, or bilinearly when
/// it is null) and returns the mean squared error over valid HR pixels and
/// channels. With `backward`, gradients are accumulated into the field and
/// the network. Throws NumericError when the loss is not finite.
PatchLoss compute_patch_loss(RadianceField& field, SRNetwork* sr, const RenderConfig& render,
                             const PatchPair& pair, bool backward = true);

struct TrainState {
  std::unique_ptr<RadianceField> field;
  std::unique_ptr<SRNetwork> sr;  // null for the bilinear strategy
  Adam optimizer;
  Strategy strategy = Strategy::FTRandPatch;
  int ratio = 2;
  int epoch = 0;
  std::int64_t iteration = 0;
  Rng rng;
  std::vector<double> loss_history;  // per iteration
  std::map<std::string, double> wall_clock;  // seconds per phase
  /// Grid sampler: remaining patch indices per training image.
  std::vector<std::vector<int>> grid_queues;
  double best_val_psnr = -1.0;
  int best_epoch = -1;

  Pipeline pipeline(const RenderConfig& render) const;
  double total_seconds() const;
};

/// Builds the end-to-end state for `config.strategy`: optimizer groups for
/// the field, plus the network unless the strategy freezes or omits it.
/// Strategies that expect pretrained weights fall back to a fresh network
/// (with a warning on stderr) when `pretrained` is null. Fresh networks take
/// the training images' channel means as mean shift.
TrainState make_train_state(RadianceField field, const SceneDataset& hr_dataset,
                            const TrainConfig& config, const SRNetwork* pretrained);

struct EpochRecord {
  int epoch = 0;
  std::int64_t iteration = 0;
  double loss = 0.0;  // mean over the epoch
  double lr = 0.0;
  double wall_seconds = 0.0;
  double val_psnr = -1.0;  // negative when not evaluated
};

struct TrainOptions {
  /// Run directory for checkpoints, logs and pseudo views (empty: in memory).
  std::filesystem::path out_dir;
  /// Stop after this many completed epochs (negative: run to the end).
  int stop_after_epoch = -1;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// One patch per training image per epoch until `config.resolved_epochs()`.
/// Checkpoints every `checkpoint_every` epochs and at the end; tracks the
/// best validation PSNR when validation views exist.
void train_end_to_end(TrainState& state, std::span<const View> train_views,
                      std::span<const View> val_views, const TrainConfig& config,
                      const TrainOptions& options = {});

/// HR views rendered by `teacher` at poses interpolated between each
/// sampled training pose and its nearest neighbour.
std::vector<View> render_pseudo_views(const RadianceField& teacher, std::span<const View> train_views,
                                      int count, const RenderConfig& render, std::uint64_t seed);

/// Trains on the union of real and teacher-rendered views with grid
/// patches. Pseudo views are written under out_dir/pseudo when a run
/// directory is given; their rendering time is booked to the state.
void distill(const RadianceField& teacher, TrainState& state, const SceneDataset& hr_dataset,
             const TrainConfig& config, const TrainOptions& options = {});

void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& config);
TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Trained models.

struct Model {
  RadianceField field;
  std::unique_ptr<SRNetwork> sr;
  Upscaler upscaler = Upscaler::Bilinear;
  int ratio = 2;
  std::string config_json;

  Pipeline pipeline(const RenderConfig& render) const;
};

/// Weights only (no optimizer state or timings), so two identical runs
/// produce identical files.
void save_model(const std::filesystem::path& path, const TrainState& state,
                const TrainConfig& config);
void save_model(const std::filesystem::path& path, const RadianceField& field, const SRNetwork* sr,
                int ratio, const std::string& config_json);
Model load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Network pretraining on synthetic images.

struct PretrainConfig {
  int ratio = 2;
  int iterations = 2000;
  int patch_size = 48;  // HR side
  double learning_rate = 2e-4;
  std::uint64_t seed = 0;
  SRConfig sr;
};

/// Random HR image of rectangles, discs, stripes, checkers and gradients.
Image procedural_image(int height, int width, Rng& rng);

/// Trains a fresh network to invert bilinear_downsample on procedural
/// images. Returns the network and its per-iteration losses.
std::pair<SRNetwork, std::vector<double>> pretrain_sr(
    const PretrainConfig& config, const std::function<void(int, double)>& on_log = {});

}  // namespace nerfsr
