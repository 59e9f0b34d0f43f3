// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nerfsr/data.hpp"
#include "nerfsr/train_config.hpp"
#include "nerfsr/training.hpp"

namespace nerfsr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

/// Environment variable holding the default dataset root.
inline constexpr const char* kDataRootEnv = "NERFSR_DATA_ROOT";

std::string code_version();
std::string device_descriptor(const std::string& device);
std::string utc_timestamp();

/// Resolves a dataset argument: "toy", "toy:SEED" or "toy:SEED:SIZE" build
/// the procedural scene unless a directory of that name exists; anything
/// else is a Blender or LLFF directory,
/// looked up under $NERFSR_DATA_ROOT when it is relative and missing.
/// An empty argument falls back to $NERFSR_DATA_ROOT itself.
struct LoadedScene {
  SceneDataset dataset;
  std::string source;
};
LoadedScene load_scene(const std::string& argument);

/// Command-line overrides; unset fields leave the config untouched.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> ratio;
  std::optional<std::string> strategy;
  std::optional<int> epochs;
  std::optional<std::string> device;
  std::optional<int> warmup_iterations;
  std::optional<std::string> pretrained_sr;
  std::optional<std::string> teacher;
};

/// Defaults < config file < overrides. Every problem found on the way
/// (unreadable file, unknown keys, invalid values) is collected and thrown
/// as one ConfigError.
TrainConfig resolve_config(const std::string& config_path, const Overrides& overrides,
                           bool* box_from_file = nullptr);

/// One manifest per run directory.
class RunManifest {
 public:
  explicit RunManifest(fs::path run_dir) : path_(std::move(run_dir) / "manifest.json") {}

  bool exists() const { return fs::exists(path_); }
  void load();
  void save() const;
  json& data() { return data_; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  json data_ = json::object();
};

struct TrainRunOptions {
  fs::path out_dir;
  bool resume = false;
  std::string command_line;
  bool quiet = false;
};

struct TrainRunResult {
  fs::path final_checkpoint;
  std::map<std::string, double> seconds;  // per phase
  double train_seconds = 0.0;             // every phase except validation
};

/// Warm-up followed by the strategy's end-to-end phase, writing the
/// manifest, logs and checkpoints under `options.out_dir`.
TrainRunResult run_training(const TrainConfig& config, const SceneDataset& hr_dataset,
                            const TrainRunOptions& options);

/// Writes the test-split renders of `checkpoint` as PNGs plus timing.json.
struct RenderRunOptions {
  fs::path checkpoint;
  fs::path out_dir;
  std::string split = "test";
  bool sr = true;
  int n_samples = -1;  // -1 keeps the checkpoint's config
};
double run_render(const SceneDataset& dataset, const RenderRunOptions& options);

std::span<const View> split_views(const SceneDataset& dataset, const std::string& split);

/// Reads every `<name>.png` for the views of `split` from `dir`.
std::vector<Image> read_renders(const fs::path& dir, std::span<const View> views);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace nerfsr::cli
