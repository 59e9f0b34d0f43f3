// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "run_support.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "nerfsr/checkpoint.hpp"
#include "nerfsr/image.hpp"
#include "nerfsr/pipeline.hpp"

#ifndef NERFSR_VERSION
#define NERFSR_VERSION "unknown"
#endif
#ifndef NERFSR_GIT_REVISION
#define NERFSR_GIT_REVISION ""
#endif

namespace nerfsr::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string name = line.substr(colon + 1);
        name.erase(0, name.find_first_not_of(' '));
        return name;
      }
    }
  }
  return "unknown cpu";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

void log_line(bool quiet, const std::string& text) {
  if (!quiet) std::cerr << text << "\n";
}

}  // namespace

std::string code_version() {
  std::string v = NERFSR_VERSION;
  const std::string rev = NERFSR_GIT_REVISION;
  if (!rev.empty()) v += "+" + rev;
  return v;
}

std::string device_descriptor(const std::string& device) {
  return device + " (" + cpu_model() + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads)";
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw FormatError("cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

LoadedScene load_scene(const std::string& argument) {
  std::string arg = argument;
  const char* root_env = std::getenv(kDataRootEnv);
  const std::string root = root_env ? root_env : "";
  if (arg.empty()) {
    if (root.empty())
      throw ConfigError(std::string("no dataset given; pass --data or set ") + kDataRootEnv);
    arg = root;
  }
  LoadedScene scene;
  if ((arg == "toy" || arg.rfind("toy:", 0) == 0) && !fs::is_directory(arg)) {
    const auto parts = split(arg, ':');
    std::uint64_t seed = 0;
    int size = 200;
    try {
      if (parts.size() > 1) seed = std::stoull(parts[1]);
      if (parts.size() > 2) size = std::stoi(parts[2]);
    } catch (const std::exception&) {
      throw ConfigError("toy dataset spec '" + arg + "' is not toy[:SEED[:SIZE]]");
    }
    if (parts.size() > 3) throw ConfigError("toy dataset spec '" + arg + "' is not toy[:SEED[:SIZE]]");
    ToySceneSpec spec = ToySceneSpec::standard(seed);
    spec.width = spec.height = size;
    scene.dataset = generate_toy_scene(spec).dataset;
    scene.source = arg;
    return scene;
  }
  fs::path path(arg);
  if (path.is_relative() && !fs::exists(path) && !root.empty()) path = fs::path(root) / path;
  if (!fs::exists(path)) throw FormatError("dataset directory " + path.string() + " does not exist");
  if (fs::exists(path / "transforms_train.json")) {
    scene.dataset = load_blender(path);
  } else if (fs::exists(path / "poses_bounds.npy")) {
    scene.dataset = load_llff(path);
  } else {
    throw FormatError(path.string() +
                      " holds neither transforms_train.json (Blender) nor poses_bounds.npy (LLFF)");
  }
  scene.source = fs::absolute(path).string();
  return scene;
}

std::span<const View> split_views(const SceneDataset& dataset, const std::string& split) {
  if (split == "train") return dataset.train;
  if (split == "val") return dataset.val;
  if (split == "test") return dataset.test;
  throw ConfigError("unknown split '" + split + "' (train, val or test)");
}

std::vector<Image> read_renders(const fs::path& dir, std::span<const View> views) {
  std::vector<Image> out;
  out.reserve(views.size());
  for (const View& v : views) {
    const fs::path p = dir / (v.name + ".png");
    if (!fs::exists(p)) throw FormatError("missing render " + p.string());
    Image img = read_png(p);
    if (img.channels == 4) img = composite_alpha(img, Vec3::Ones());
    out.push_back(std::move(img));
  }
  return out;
}

// ---------------------------------------------------------------------------

TrainConfig resolve_config(const std::string& config_path, const Overrides& o,
                           bool* box_from_file) {
  std::vector<std::string> problems;
  TrainConfig config;
  if (box_from_file) *box_from_file = false;
  if (!config_path.empty()) {
    try {
      const std::string text = read_text(config_path);
      config = train_config_from_json(text, config);
      if (box_from_file) {
        const json j = json::parse(text);
        *box_from_file = j.contains("field") && j["field"].contains("box_min");
      }
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
  }
  if (o.seed) config.seed = *o.seed;
  if (o.ratio) config.ratio = *o.ratio;
  if (o.strategy) {
    try {
      config.strategy = parse_strategy(*o.strategy);
    } catch (const ConfigError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (o.epochs) config.epochs = *o.epochs;
  if (o.device) config.device = *o.device;
  if (o.warmup_iterations) config.warmup.iterations = *o.warmup_iterations;
  if (o.pretrained_sr) config.pretrained_sr = *o.pretrained_sr;
  if (o.teacher) config.teacher_checkpoint = *o.teacher;
  if (o.epochs && *o.epochs < 0) problems.emplace_back("--epochs must be non-negative");
  for (auto& p : config.problems()) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& p : problems) message += "\n  " + p;
    throw ConfigError(message);
  }
  return config;
}

void RunManifest::load() { data_ = json::parse(read_text(path_)); }

void RunManifest::save() const { write_text(path_, data_.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<SRNetwork> load_pretrained_network(const TrainConfig& config) {
  if (config.pretrained_sr.empty() || !uses_pretrained_sr(config.strategy)) return nullptr;
  SRConfig sc = config.sr;
  sc.ratio = config.ratio;
  auto net = std::make_unique<SRNetwork>(sc, derive_seed(config.seed, 0x5E));
  load_pretrained(*net, config.pretrained_sr, true);
  return net;
}

double read_seconds(const json& timing, const char* key) {
  return timing.contains(key) ? timing[key].get<double>() : 0.0;
}

}  // namespace

TrainRunResult run_training(const TrainConfig& config, const SceneDataset& hr_dataset,
                            const TrainRunOptions& options) {
  const fs::path& out = options.out_dir;
  fs::create_directories(out);
  RunManifest manifest(out);
  const std::string config_text = train_config_json(config);
  if (manifest.exists()) {
    if (!options.resume)
      throw ConfigError(out.string() +
                        " already holds a run manifest; pass --resume to continue it");
    manifest.load();
    if (manifest.data().value("config", json::object()) != json::parse(config_text))
      throw ConfigError("the resolved config differs from the one recorded in " +
                        manifest.path().string());
    manifest.data()["resumed_at"].push_back(utc_timestamp());
  } else {
    manifest.data() = json{{"command", options.command_line},
                           {"config", json::parse(config_text)},
                           {"config_fingerprint", config_fingerprint(config)},
                           {"seed", config.seed},
                           {"code_version", code_version()},
                           {"device", device_descriptor(config.device)},
                           {"dataset", {{"name", hr_dataset.name},
                                        {"kind", to_string(hr_dataset.kind)},
                                        {"fingerprint", hr_dataset.fingerprint()}}},
                           {"start_time", utc_timestamp()},
                           {"end_time", nullptr},
                           {"status", "running"},
                           {"timing", json::object()},
                           {"outputs", json::object()}};
  }
  manifest.save();
  json& timing = manifest.data()["timing"];
  json& outputs = manifest.data()["outputs"];

  try {
    // Warm-up at LR.
    const fs::path warm_path = out / "warmup.ckpt";
    RadianceField field;
    if (options.resume && fs::exists(warm_path)) {
      field = load_model(warm_path).field;
      log_line(options.quiet, "resume: reusing " + warm_path.string());
    } else {
      const SceneDataset lr = downsample_dataset(hr_dataset, config.ratio);
      WarmupOptions wo;
      wo.dump_path = out / "diverged_warmup.ckpt";
      std::ofstream log(out / "warmup_log.jsonl");
      wo.on_log = [&](const WarmupRecord& r) {
        log << json{{"iter", r.iteration}, {"loss", r.loss}, {"lr_grid", r.lr_grid},
                    {"resolution", r.resolution}}.dump()
            << "\n";
        log_line(options.quiet, "warm-up " + std::to_string(r.iteration) + "/" +
                                    std::to_string(config.warmup.iterations) +
                                    " loss " + std::to_string(r.loss));
      };
      WarmupResult warm = warmup_backbone(RadianceField(config.field, derive_seed(config.seed, 0xF1E1D)),
                                          lr, config, wo);
      field = std::move(warm.field);
      timing["warmup"] = warm.seconds;
      save_model(warm_path, field, nullptr, config.ratio, config_text);
    }
    outputs["warmup_checkpoint"] = warm_path.string();
    manifest.save();

    // Distillation teacher: a backbone trained directly at HR.
    std::optional<RadianceField> teacher;
    if (config.strategy == Strategy::Distillation && config.resolved_epochs() > 0) {
      const fs::path teacher_path =
          config.teacher_checkpoint.empty() ? out / "teacher.ckpt" : fs::path(config.teacher_checkpoint);
      if (fs::exists(teacher_path)) {
        teacher = load_model(teacher_path).field;
      } else {
        const TrainConfig tc = full_resolution_config(config);
        WarmupResult t = warmup_backbone(
            RadianceField(tc.field, derive_seed(config.seed, 0x7EAC)), hr_dataset, tc);
        timing["teacher"] = t.seconds;
        save_model(teacher_path, t.field, nullptr, 1, train_config_json(tc));
        teacher = std::move(t.field);
      }
      outputs["teacher_checkpoint"] = teacher_path.string();
      manifest.save();
    }

    // End-to-end phase.
    const fs::path state_path = out / "state.ckpt";
    TrainState state;
    if (options.resume && fs::exists(state_path)) {
      state = load_train_state(state_path, config);
      log_line(options.quiet, "resume: continuing from epoch " + std::to_string(state.epoch));
    } else {
      const auto pretrained = load_pretrained_network(config);
      state = make_train_state(std::move(field), hr_dataset, config, pretrained.get());
    }
    TrainOptions to;
    to.out_dir = out;
    to.on_epoch = [&](const EpochRecord& r) {
      std::string line = "epoch " + std::to_string(r.epoch) + "/" +
                         std::to_string(config.resolved_epochs()) + " loss " + std::to_string(r.loss);
      if (r.val_psnr >= 0.0) line += " val " + std::to_string(r.val_psnr) + " dB";
      log_line(options.quiet, line);
    };
    if (config.resolved_epochs() > 0) {
      if (config.strategy == Strategy::Distillation)
        distill(*teacher, state, hr_dataset, config, to);
      else
        train_end_to_end(state, hr_dataset.train, hr_dataset.val, config, to);
    } else {
      save_model(out / "final.ckpt", state, config);
    }
    for (const auto& [phase, seconds] : state.wall_clock) timing[phase] = seconds;

    TrainRunResult result;
    result.final_checkpoint = out / "final.ckpt";
    for (const auto& [phase, seconds] : timing.items()) result.seconds[phase] = seconds.get<double>();
    result.train_seconds = read_seconds(timing, "warmup") + read_seconds(timing, "teacher") +
                           read_seconds(timing, "pseudo_data") + read_seconds(timing, "end_to_end");
    timing["train_total"] = result.train_seconds;
    outputs["final_checkpoint"] = result.final_checkpoint.string();
    if (fs::exists(out / "best.ckpt")) outputs["best_checkpoint"] = (out / "best.ckpt").string();
    if (fs::exists(out / "train_log.jsonl")) outputs["train_log"] = (out / "train_log.jsonl").string();
    outputs["warmup_log"] = (out / "warmup_log.jsonl").string();
    manifest.data()["status"] = "complete";
    manifest.data()["end_time"] = utc_timestamp();
    manifest.save();
    return result;
  } catch (const std::exception& e) {
    manifest.data()["status"] = "failed";
    manifest.data()["error"] = e.what();
    manifest.data()["end_time"] = utc_timestamp();
    manifest.save();
    throw;
  }
}

double run_render(const SceneDataset& dataset, const RenderRunOptions& options) {
  const Model model = load_model(options.checkpoint);
  RenderConfig rc;
  if (!model.config_json.empty() && model.config_json != "{}") {
    try {
      rc = train_config_from_json(model.config_json).render;
    } catch (const ConfigError&) {
      // Configs from other tools keep the default render settings.
    }
  }
  rc.background = dataset.background;
  if (options.n_samples > 0) rc.n_samples = options.n_samples;
  const Pipeline pipe = model.pipeline(rc);
  const auto views = split_views(dataset, options.split);
  if (views.empty()) throw ConfigError("split '" + options.split + "' has no views");
  for (const View& v : views)
    if (v.camera.width % model.ratio != 0 || v.camera.height % model.ratio != 0)
      throw ShapeError("view " + v.name + " (" + std::to_string(v.camera.width) + "x" +
                       std::to_string(v.camera.height) + ") is not divisible by the checkpoint ratio " +
                       std::to_string(model.ratio));
  fs::create_directories(options.out_dir);
  json frames = json::array();
  double total = 0.0;
  for (const View& v : views) {
    const auto start = Clock::now();
    Image img;
    if (options.sr) {
      img = render_pipeline(pipe, v.camera).hr;
    } else {
      img = render_image(model.field, downscale_camera(v.camera, model.ratio), rc).rgb;
    }
    const double seconds = seconds_since(start);
    write_png(options.out_dir / (v.name + ".png"), img);
    frames.push_back({{"name", v.name}, {"seconds", seconds}, {"width", img.width}, {"height", img.height}});
    total += seconds;
  }
  const double mean = total / static_cast<double>(views.size());
  json timing{{"checkpoint", fs::absolute(options.checkpoint).string()},
              {"split", options.split},
              {"sr", options.sr},
              {"ratio", model.ratio},
              {"field_bytes", pipe.field_bytes()},
              {"sr_bytes", options.sr ? pipe.sr_bytes() : 0},
              {"mean_seconds", mean},
              {"frames", frames}};
  write_text(options.out_dir / "timing.json", timing.dump(2) + "\n");
  return mean;
}

}  // namespace nerfsr::cli
