// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "nerfsr/checkpoint.hpp"
#include "nerfsr/evaluation.hpp"
#include "nerfsr/image.hpp"
#include "run_support.hpp"

#ifndef NERFSR_SHARE_DIR
#define NERFSR_SHARE_DIR ""
#endif

namespace nerfsr::cli {
namespace {

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void add_train_flags(CLI::App& app, std::string& config_path, Overrides& o) {
  app.add_option("--config", config_path, "JSON config applied over the defaults")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& v) { o.seed = v; },
                                         "Root seed for every random stream");
  app.add_option_function<int>("--ratio", [&o](const int& v) { o.ratio = v; }, "Upscaling ratio")
      ->check(CLI::IsMember({2, 4, 8}));
  app.add_option_function<std::string>("--strategy", [&o](const std::string& v) { o.strategy = v; },
                                       "bilinear, pretrained, scratch, ft-gridpatch, ft-randpatch or distillation");
  app.add_option_function<int>("--epochs", [&o](const int& v) { o.epochs = v; },
                               "End-to-end epochs (0: warm-up only)");
  app.add_option_function<std::string>("--device", [&o](const std::string& v) { o.device = v; }, "Compute device");
  app.add_option_function<int>("--warmup-iters", [&o](const int& v) { o.warmup_iterations = v; },
                               "Warm-up iterations");
  app.add_option_function<std::string>("--pretrained-sr", [&o](const std::string& v) { o.pretrained_sr = v; },
                                       "SR archive for the pretrained strategies");
  app.add_option_function<std::string>("--teacher", [&o](const std::string& v) { o.teacher = v; },
                                       "HR field checkpoint for distillation");
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> data;
  std::vector<std::string> methods;  // NAME=DIR, DIR may contain {scene}
  std::string split = "test";
  fs::path out;
  fs::path perceptual;
  bool no_timing = false;
};

json read_json_if(const fs::path& p) {
  if (!fs::exists(p)) return json::object();
  return json::parse(read_text(p));
}

int run_eval(const EvalArgs& a) {
  if (a.methods.empty()) throw ConfigError("eval needs at least one --method NAME=DIR");
  std::vector<MethodResult> rows;
  const std::vector<std::string> data = a.data.empty() ? std::vector<std::string>{""} : a.data;
  for (const std::string& d : data) {
    const LoadedScene scene = load_scene(d);
    const auto views = split_views(scene.dataset, a.split);
    if (views.empty()) throw FormatError("no ground truth: split '" + a.split + "' is empty");
    std::vector<Image> gt;
    std::vector<std::string> names;
    for (const View& v : views) {
      gt.push_back(v.image);
      names.push_back(v.name);
    }
    for (const std::string& m : a.methods) {
      const auto eq = m.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--method expects NAME=DIR, got '" + m + "'");
      std::string dir = m.substr(eq + 1);
      if (const auto pos = dir.find("{scene}"); pos != std::string::npos)
        dir.replace(pos, 7, scene.dataset.name);
      const std::vector<Image> renders = read_renders(dir, views);
      MethodResult r;
      r.scene = scene.dataset.name;
      r.method = m.substr(0, eq);
      r.views = evaluate_views(renders, gt, names);
      if (!a.perceptual.empty()) {
        bool available = true;
        for (std::size_t i = 0; i < renders.size(); ++i) {
          const PerceptualResult p = perceptual_distance(renders[i], gt[i], a.perceptual);
          r.perceptual_status = p.status;
          if (!p.available) {
            available = false;
            break;
          }
          r.views[i].perceptual = p.value;
        }
        if (!available)
          for (auto& v : r.views) v.perceptual.reset();
      }
      const json timing = read_json_if(fs::path(dir) / "timing.json");
      r.render_seconds = timing.value("mean_seconds", 0.0);
      r.field_bytes = timing.value("field_bytes", std::size_t{0});
      r.sr_bytes = timing.value("sr_bytes", std::size_t{0});
      fs::path run_dir = fs::path(dir).parent_path();
      if (!fs::exists(run_dir / "manifest.json")) run_dir = run_dir.parent_path();
      const json manifest = read_json_if(run_dir / "manifest.json");
      if (manifest.contains("timing") && manifest["timing"].contains("train_total"))
        r.train_seconds = manifest["timing"]["train_total"].get<double>();
      if (manifest.contains("config_fingerprint"))
        r.config_fingerprint = manifest["config_fingerprint"].get<std::uint64_t>();
      if (manifest.contains("config")) r.device = manifest["config"].value("device", "cpu");
      rows.push_back(std::move(r));
    }
  }
  EvalReport report = build_report(std::move(rows));
  report.include_timing = !a.no_timing;
  const std::string table = report.table();
  std::cout << table;
  if (!a.out.empty()) {
    write_text(a.out / "report.txt", table);
    write_text(a.out / "report.json", report.json());
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  fs::path config;
  fs::path out;
  bool resume = false;
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int run_ablate(const AblateArgs& a) {
  const json spec = json::parse(read_text(a.config));
  std::vector<std::string> problems;
  for (const char* key : {"strategies", "seeds"})
    if (!spec.contains(key) || !spec[key].is_array() || spec[key].empty())
      problems.push_back(std::string("ablation config needs a non-empty '") + key + "' list");
  for (const auto& [key, value] : spec.items())
    if (key != "strategies" && key != "seeds" && key != "data" && key != "ratio" && key != "train" &&
        key != "split")
      problems.push_back("unknown ablation key '" + key + "'");
  std::vector<Strategy> strategies;
  if (spec.contains("strategies") && spec["strategies"].is_array())
    for (const auto& s : spec["strategies"]) {
      try {
        strategies.push_back(parse_strategy(s.get<std::string>()));
      } catch (const ConfigError& e) {
        problems.emplace_back(e.what());
      }
    }
  TrainConfig base;
  if (spec.contains("train")) {
    try {
      base = train_config_from_json(spec["train"].dump(), base);
    } catch (const ConfigError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (spec.contains("ratio")) base.ratio = spec["ratio"].get<int>();
  for (auto& p : base.problems()) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string message = "invalid ablation config:";
    for (const auto& p : problems) message += "\n  " + p;
    throw ConfigError(message);
  }
  const std::string split = spec.value("split", "test");
  const LoadedScene scene = load_scene(spec.value("data", ""));
  const bool box_in_file = spec.contains("train") && spec["train"].contains("field") &&
                           spec["train"]["field"].contains("box_min");
  if (!box_in_file) base.field.box = scene.dataset.box;
  base.render.background = scene.dataset.background;
  const auto views = split_views(scene.dataset, split);

  fs::create_directories(a.out);
  int failures = 0;
  json cells = json::array();
  for (Strategy strategy : strategies) {
    for (const auto& seed_value : spec["seeds"]) {
      const auto seed = seed_value.get<std::uint64_t>();
      const std::string cell_name = to_string(strategy) + "_seed" + std::to_string(seed);
      const fs::path cell_dir = a.out / "cells" / cell_name;
      const fs::path result_path = cell_dir / "result.json";
      json result = read_json_if(result_path);
      if (a.resume && result.value("status", "") == "complete") {
        std::cerr << "skip " << cell_name << " (complete)\n";
        cells.push_back(result);
        continue;
      }
      std::cerr << "run " << cell_name << "\n";
      result = json{{"strategy", to_string(strategy)}, {"seed", seed}};
      try {
        TrainConfig c = base;
        c.strategy = strategy;
        c.seed = seed;
        TrainRunOptions ro;
        ro.out_dir = cell_dir / "run";
        ro.resume = a.resume;
        ro.command_line = "ablate " + a.config.string() + " [" + cell_name + "]";
        ro.quiet = true;
        if (!a.resume && fs::exists(ro.out_dir)) fs::remove_all(ro.out_dir);
        const TrainRunResult tr = run_training(c, scene.dataset, ro);
        RenderRunOptions render;
        render.checkpoint = tr.final_checkpoint;
        render.out_dir = cell_dir / "renders";
        render.split = split;
        run_render(scene.dataset, render);
        std::vector<Image> gt;
        std::vector<std::string> names;
        for (const View& v : views) {
          gt.push_back(v.image);
          names.push_back(v.name);
        }
        const auto metrics = evaluate_views(read_renders(render.out_dir, views), gt, names);
        MethodResult mr;
        mr.views = metrics;
        result["status"] = "complete";
        result["psnr"] = mr.mean_psnr();
        result["ssim"] = mr.mean_ssim();
        result["train_seconds"] = tr.train_seconds;
        result["phases"] = tr.seconds;
      } catch (const std::exception& e) {
        ++failures;
        result["status"] = "failed";
        result["error"] = e.what();
        std::cerr << "cell " << cell_name << " failed: " << e.what() << "\n";
      }
      write_text(result_path, result.dump(2) + "\n");
      cells.push_back(result);
    }
  }

  json summary = json::array();
  std::ostringstream table;
  table << "Strategy        PSNR(dB)          SSIM    TrainTime(m)  Runs\n";
  table << "---------------------------------------------------------------\n";
  for (Strategy strategy : strategies) {
    std::vector<double> psnrs, ssims, minutes;
    int total = 0;
    for (const auto& c : cells) {
      if (c.value("strategy", "") != to_string(strategy)) continue;
      ++total;
      if (c.value("status", "") != "complete") continue;
      psnrs.push_back(c["psnr"].get<double>());
      ssims.push_back(c["ssim"].get<double>());
      minutes.push_back(c["train_seconds"].get<double>() / 60.0);
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-14s  %6.2f +- %-5.2f  %6.4f  %12.2f  %d/%d\n",
                  to_string(strategy).c_str(), mean_of(psnrs), std_of(psnrs), mean_of(ssims),
                  mean_of(minutes), static_cast<int>(psnrs.size()), total);
    table << line;
    summary.push_back({{"strategy", to_string(strategy)},
                       {"psnr_mean", mean_of(psnrs)},
                       {"psnr_std", std_of(psnrs)},
                       {"ssim_mean", mean_of(ssims)},
                       {"train_minutes_mean", mean_of(minutes)},
                       {"completed", psnrs.size()},
                       {"runs", total}});
  }
  std::cout << table.str();
  write_text(a.out / "summary.txt", table.str());
  write_text(a.out / "summary.json",
             json{{"scene", scene.dataset.name}, {"split", split}, {"rows", summary}, {"cells", cells}}.dump(2) +
                 "\n");
  return failures == 0 ? 0 : 3;
}

}  // namespace
}  // namespace nerfsr::cli

int main(int argc, char** argv) {
  using namespace nerfsr;
  using namespace nerfsr::cli;
  CLI::App app{"Radiance-field rendering at low resolution with learned super-resolution"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  // train
  std::string train_config_path;
  Overrides overrides;
  std::string train_data;
  fs::path train_out;
  bool train_resume = false;
  bool train_quiet = false;
  auto* train = app.add_subcommand("train", "Warm-up and end-to-end training into a run directory");
  add_train_flags(*train, train_config_path, overrides);
  train->add_option("--data", train_data, "Dataset directory or toy[:SEED[:SIZE]] (default $NERFSR_DATA_ROOT)");
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_flag("--resume", train_resume, "Continue the run recorded in --out");
  train->add_flag("--quiet", train_quiet, "Only print errors");

  // render
  RenderRunOptions render_opts;
  std::string render_data;
  std::string render_sr = "on";
  auto* render = app.add_subcommand("render", "Render a split of a dataset from a checkpoint");
  render->add_option("--checkpoint", render_opts.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  render->add_option("--data", render_data, "Dataset providing the poses (default $NERFSR_DATA_ROOT)");
  render->add_option("--split", render_opts.split, "train, val or test")->capture_default_str();
  render->add_option("--out", render_opts.out_dir, "Output directory")->required();
  render->add_option("--sr", render_sr, "off emits the LR renders")->check(CLI::IsMember({"on", "off"}));
  render->add_option("--samples", render_opts.n_samples, "Samples per ray (default: from the checkpoint)");

  // eval
  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Compare renders with ground truth and write a report");
  eval->add_option("--data", eval_args.data, "Dataset(s) with ground truth (default $NERFSR_DATA_ROOT)");
  eval->add_option("--method", eval_args.methods, "NAME=DIR of <view>.png renders; {scene} expands")->required();
  eval->add_option("--split", eval_args.split, "train, val or test")->capture_default_str();
  eval->add_option("--out", eval_args.out, "Directory for report.txt and report.json");
  eval->add_option("--perceptual-weights", eval_args.perceptual, "Perceptual feature network archive");
  eval->add_flag("--no-timing", eval_args.no_timing, "Leave out wall-clock columns");

  // ablate
  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Run a strategy x seed matrix and summarize it");
  ablate->add_option("--config", ablate_args.config, "Ablation JSON")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", ablate_args.out, "Output directory")->required();
  ablate->add_flag("--resume", ablate_args.resume, "Skip completed cells");

  // profile
  fs::path profile_ckpt;
  std::string profile_data;
  std::string profile_split = "test";
  int profile_repeats = 3;
  auto* profile = app.add_subcommand("profile", "Time rendering and count model bytes");
  profile->add_option("--checkpoint", profile_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  profile->add_option("--data", profile_data, "Dataset providing the cameras");
  profile->add_option("--split", profile_split, "train, val or test")->capture_default_str();
  profile->add_option("--repeats", profile_repeats, "Timed passes")->capture_default_str();

  // make-toy
  fs::path toy_out;
  std::uint64_t toy_seed = 0;
  int toy_size = 200;
  auto* make_toy = app.add_subcommand("make-toy", "Write the procedural scene in the Blender layout");
  make_toy->add_option("--out", toy_out, "Dataset directory")->required();
  make_toy->add_option("--seed", toy_seed, "Scene seed")->capture_default_str();
  make_toy->add_option("--size", toy_size, "Image side in pixels")->capture_default_str();

  // pretrain-sr
  PretrainConfig pretrain_config;
  fs::path pretrain_out;
  auto* pretrain = app.add_subcommand("pretrain-sr", "Train the SR network on synthetic images");
  pretrain->add_option("--ratio", pretrain_config.ratio, "Upscaling ratio")->check(CLI::IsMember({2, 4, 8}));
  pretrain->add_option("--iterations", pretrain_config.iterations)->capture_default_str();
  pretrain->add_option("--patch", pretrain_config.patch_size, "HR patch side")->capture_default_str();
  pretrain->add_option("--lr", pretrain_config.learning_rate)->capture_default_str();
  pretrain->add_option("--seed", pretrain_config.seed)->capture_default_str();
  pretrain->add_option("--blocks", pretrain_config.sr.n_blocks)->capture_default_str();
  pretrain->add_option("--channels", pretrain_config.sr.n_channels)->capture_default_str();
  pretrain->add_option("--out", pretrain_out, "SR archive")->required();

  // import-sr
  fs::path import_dir;
  fs::path import_table = fs::path(NERFSR_SHARE_DIR) / "edsr_name_table.json";
  fs::path import_out;
  SRConfig import_config;
  auto* import_sr = app.add_subcommand("import-sr", "Convert exported .npy weights into an SR archive");
  import_sr->add_option("--npy-dir", import_dir, "Directory of <array name>.npy files")->required()->check(CLI::ExistingDirectory);
  import_sr->add_option("--table", import_table, "Name table JSON")->capture_default_str();
  import_sr->add_option("--ratio", import_config.ratio)->check(CLI::IsMember({2, 4, 8}));
  import_sr->add_option("--blocks", import_config.n_blocks)->capture_default_str();
  import_sr->add_option("--channels", import_config.n_channels)->capture_default_str();
  import_sr->add_option("--out", import_out, "SR archive")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      bool box_from_file = false;
      TrainConfig config = resolve_config(train_config_path, overrides, &box_from_file);
      const LoadedScene scene = load_scene(train_data);
      if (!box_from_file) config.field.box = scene.dataset.box;
      config.render.background = scene.dataset.background;
      TrainRunOptions ro;
      ro.out_dir = train_out;
      ro.resume = train_resume;
      ro.command_line = joined_args(argc, argv);
      ro.quiet = train_quiet;
      const TrainRunResult r = run_training(config, scene.dataset, ro);
      std::cout << "final checkpoint: " << r.final_checkpoint.string() << "\n"
                << "train seconds: " << r.train_seconds << "\n";
    } else if (*render) {
      render_opts.sr = render_sr == "on";
      const LoadedScene scene = load_scene(render_data);
      const double mean = run_render(scene.dataset, render_opts);
      std::cout << "rendered " << split_views(scene.dataset, render_opts.split).size() << " views, "
                << mean << " s/frame\n";
    } else if (*eval) {
      return run_eval(eval_args);
    } else if (*ablate) {
      return run_ablate(ablate_args);
    } else if (*profile) {
      const Model model = load_model(profile_ckpt);
      RenderConfig rc;
      if (!model.config_json.empty() && model.config_json != "{}")
        rc = train_config_from_json(model.config_json).render;
      const LoadedScene scene = load_scene(profile_data);
      rc.background = scene.dataset.background;
      std::vector<CameraModel> cameras;
      for (const View& v : split_views(scene.dataset, profile_split)) cameras.push_back(v.camera);
      const ProfileResult p = profile_render(model.pipeline(rc), cameras, profile_repeats);
      std::cout << json{{"mean_seconds", p.mean_seconds}, {"std_seconds", p.std_seconds},
                        {"frames", p.frames}, {"field_bytes", p.field_bytes},
                        {"sr_bytes", p.sr_bytes}, {"total_bytes", p.total_bytes}}.dump(2)
                << "\n";
    } else if (*make_toy) {
      ToySceneSpec spec = ToySceneSpec::standard(toy_seed);
      spec.width = spec.height = toy_size;
      const ToyScene scene = generate_toy_scene(spec);
      write_blender_dataset(scene.dataset, toy_out);
      std::cout << "wrote " << scene.dataset.train.size() << "/" << scene.dataset.val.size() << "/"
                << scene.dataset.test.size() << " views to " << toy_out.string() << "\n";
    } else if (*pretrain) {
      pretrain_config.sr.ratio = pretrain_config.ratio;
      auto [net, losses] = pretrain_sr(pretrain_config, [](int it, double loss) {
        std::cerr << "pretrain " << it << " loss " << loss << "\n";
      });
      Archive archive;
      archive.kind = "sr";
      net.save(archive);
      save_archive(pretrain_out, archive);
      std::cout << "wrote " << pretrain_out.string() << "\n";
    } else if (*import_sr) {
      const NameTable table = NameTable::read(import_table);
      const Archive archive = import_named_arrays(read_npy_dir(import_dir), table, import_config);
      SRNetwork check(import_config, 0);
      load_pretrained(check, archive, true);
      save_archive(import_out, archive);
      std::cout << "wrote " << import_out.string() << "\n";
    }
  } catch (const nerfsr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
