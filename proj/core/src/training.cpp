// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nerfsr/evaluation.hpp"
#include "nerfsr/image.hpp"

namespace nerfsr {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Buffer to_doubles(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw FormatError("corrupt random generator state in checkpoint");
}

}  // namespace

// ---------------------------------------------------------------------------
// Adam

void Adam::add_group(std::string name, std::vector<Param*> params, double lr) {
  Group g;
  g.name = std::move(name);
  g.lr = lr;
  for (Param* p : params) {
    g.m.emplace_back(p->numel(), 0.0);
    g.v.emplace_back(p->numel(), 0.0);
  }
  g.params = std::move(params);
  groups_.push_back(std::move(g));
}

void Adam::step() {
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bc2_sqrt = std::sqrt(1.0 - std::pow(b2, static_cast<double>(steps_)));
  for (Group& g : groups_) {
    const double step_size = g.lr / bc1;
    for (std::size_t k = 0; k < g.params.size(); ++k) {
      Param& p = *g.params[k];
      double* m = g.m[k].data();
      double* v = g.v[k].data();
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double grad = p.grad[i];
        m[i] = b1 * m[i] + (1.0 - b1) * grad;
        v[i] = b2 * v[i] + (1.0 - b2) * grad * grad;
        p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) / bc2_sqrt + config_.eps);
      }
    }
  }
}

void Adam::zero_grad() {
  for (Group& g : groups_)
    for (Param* p : g.params) p->zero_grad();
}

void Adam::reset() {
  steps_ = 0;
  for (Group& g : groups_) {
    for (auto& m : g.m) std::fill(m.begin(), m.end(), 0.0);
    for (auto& v : g.v) std::fill(v.begin(), v.end(), 0.0);
  }
}

void Adam::set_lr(double lr) {
  for (Group& g : groups_) g.lr = lr;
}

void Adam::scale_lr(double factor) {
  for (Group& g : groups_) g.lr *= factor;
}

Adam::Group* Adam::group(const std::string& name) {
  for (Group& g : groups_)
    if (g.name == name) return &g;
  return nullptr;
}

bool Adam::contains(const Param* p) const {
  for (const Group& g : groups_)
    if (std::find(g.params.begin(), g.params.end(), p) != g.params.end()) return true;
  return false;
}

void Adam::save(Archive& archive, const std::string& prefix) const {
  archive.add(prefix + "steps", {1}, {static_cast<double>(steps_)});
  for (const Group& g : groups_) {
    archive.add(prefix + g.name + ".lr", {1}, {g.lr});
    for (std::size_t k = 0; k < g.params.size(); ++k) {
      const auto n = static_cast<std::int64_t>(g.m[k].size());
      archive.add(prefix + g.name + "." + g.params[k]->name + ".m", {n}, g.m[k]);
      archive.add(prefix + g.name + "." + g.params[k]->name + ".v", {n}, g.v[k]);
    }
  }
}

void Adam::load(const Archive& archive, const std::string& prefix) {
  steps_ = static_cast<std::int64_t>(archive.at(prefix + "steps").data.at(0));
  for (Group& g : groups_) {
    g.lr = archive.at(prefix + g.name + ".lr").data.at(0);
    for (std::size_t k = 0; k < g.params.size(); ++k) {
      const std::string base = prefix + g.name + "." + g.params[k]->name;
      const ArchiveArray& m = archive.at(base + ".m");
      const ArchiveArray& v = archive.at(base + ".v");
      if (m.data.size() != g.m[k].size() || v.data.size() != g.v[k].size())
        throw FormatError("optimizer moments for '" + base + "' have the wrong size");
      g.m[k] = m.data;
      g.v[k] = v.data;
    }
  }
}

// ---------------------------------------------------------------------------
// Warm-up

std::vector<std::array<int, 3>> upsample_schedule(const std::array<int, 3>& initial,
                                                  const std::array<int, 3>& final_resolution,
                                                  std::size_t steps) {
  std::vector<std::array<int, 3>> out;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(steps);
    std::array<int, 3> res{};
    for (int a = 0; a < 3; ++a) {
      const double lo = std::log(static_cast<double>(initial[a]));
      const double hi = std::log(static_cast<double>(final_resolution[a]));
      res[a] = std::max(initial[a], static_cast<int>(std::lround(std::exp(lo + f * (hi - lo)))));
      if (!out.empty()) res[a] = std::max(res[a], out.back()[a]);
    }
    out.push_back(res);
  }
  return out;
}

namespace {

Adam warmup_optimizer(RadianceField& field, const TrainConfig& config) {
  Adam opt(config.adam);
  opt.add_group("field.grid", field.grid_parameters(), config.warmup.lr_grid);
  opt.add_group("field.network", field.network_parameters(), config.warmup.lr_network);
  return opt;
}

}  // namespace

WarmupResult warmup_backbone(RadianceField field, const SceneDataset& lr_dataset,
                             const TrainConfig& config, const WarmupOptions& options) {
  const auto start = Clock::now();
  WarmupResult result;
  const WarmupConfig& wc = config.warmup;
  if (wc.iterations == 0) {
    result.field = std::move(field);
    return result;
  }
  if (lr_dataset.train.empty()) throw ConfigError("warm-up needs at least one training view");

  std::vector<Vec3> origins;
  std::vector<Vec3> directions;
  std::vector<Vec3> targets;
  double near = 0.0;
  double far = 0.0;
  for (std::size_t v = 0; v < lr_dataset.train.size(); ++v) {
    const View& view = lr_dataset.train[v];
    const RayBundle rays = generate_rays(view.camera);
    if (v == 0) {
      near = rays.near;
      far = rays.far;
    } else if (rays.near != near || rays.far != far) {
      throw ConfigError("warm-up needs training views with identical near/far bounds");
    }
    origins.insert(origins.end(), rays.origins.begin(), rays.origins.end());
    directions.insert(directions.end(), rays.directions.begin(), rays.directions.end());
    for (std::size_t p = 0; p < view.image.pixel_count(); ++p)
      targets.emplace_back(view.image.data[3 * p], view.image.data[3 * p + 1],
                           view.image.data[3 * p + 2]);
  }

  const auto schedule = upsample_schedule(field.config().resolution, wc.final_resolution,
                                          wc.upsample_iters.size());
  Adam opt = warmup_optimizer(field, config);
  const double decay = std::pow(wc.lr_decay_target, 1.0 / wc.iterations);

  RenderConfig rc = config.render;
  rc.n_samples = wc.n_samples;
  rc.stratified = true;

  Rng rng(derive_seed(config.seed, 0x3A3A));
  std::uniform_int_distribution<std::size_t> pick(0, origins.size() - 1);
  const int batch = wc.batch_rays;
  RayBundle rays;
  rays.near = near;
  rays.far = far;
  rays.grid_height = 1;
  rays.grid_width = batch;
  rays.origins.resize(batch);
  rays.directions.resize(batch);
  std::vector<Vec3> target(batch);
  std::vector<Vec3> grad(batch);
  std::size_t next_upsample = 0;
  result.loss.reserve(wc.iterations);

  for (int it = 0; it < wc.iterations; ++it) {
    if (next_upsample < wc.upsample_iters.size() && it == wc.upsample_iters[next_upsample]) {
      field = field.upsampled(schedule[next_upsample]);
      opt = warmup_optimizer(field, config);
      ++next_upsample;
    }
    for (int b = 0; b < batch; ++b) {
      const std::size_t k = pick(rng);
      rays.origins[b] = origins[k];
      rays.directions[b] = directions[k];
      target[b] = targets[k];
    }
    rc.seed = derive_seed(config.seed, 0x100000000ULL + static_cast<std::uint64_t>(it));
    opt.zero_grad();
    RenderTape tape;
    const RayRenderResult out = render_rays(field, rays, 0, rays.size(), rc, &tape);
    double loss = 0.0;
    const double scale = 2.0 / (3.0 * batch);
    for (int b = 0; b < batch; ++b) {
      const Vec3 diff = out.rgb[b] - target[b];
      loss += diff.squaredNorm();
      grad[b] = scale * diff;
    }
    loss /= 3.0 * batch;
    if (!std::isfinite(loss)) {
      if (!options.dump_path.empty()) {
        Archive dump;
        dump.kind = "field";
        field.save(dump);
        save_archive(options.dump_path, dump);
      }
      throw NumericError("warm-up loss became non-finite at iteration " + std::to_string(it) +
                         (options.dump_path.empty() ? std::string()
                                                    : "; field dumped to " + options.dump_path.string()));
    }
    render_rays_backward(field, tape, grad);
    opt.step();
    opt.scale_lr(decay);
    result.loss.push_back(loss);
    if (options.on_log && ((it + 1) % std::max(options.log_every, 1) == 0 || it + 1 == wc.iterations))
      options.on_log({it + 1, loss, opt.groups().front().lr, field.config().resolution});
  }
  result.field = std::move(field);
  result.seconds = seconds_since(start);
  return result;
}

FieldConfig full_resolution_field(const FieldConfig& lr_field, int ratio) {
  FieldConfig c = lr_field;
  for (int& n : c.resolution) n = (n - 1) * ratio + 1;
  return c;
}

TrainConfig full_resolution_config(const TrainConfig& config) {
  TrainConfig c = config;
  c.field = full_resolution_field(config.field, config.ratio);
  for (int& n : c.warmup.final_resolution) n *= config.ratio;
  c.warmup.n_samples *= 2;
  c.render.n_samples *= 2;
  return c;
}

// ---------------------------------------------------------------------------
// Patch loss

PatchLoss compute_patch_loss(RadianceField& field, SRNetwork* sr, const RenderConfig& render,
                             const PatchPair& pair, bool backward) {
  const RayBundle& rays = pair.lr_rays;
  const int ratio = pair.spec.ratio;
  RenderTape tape;
  const RayRenderResult out =
      render_rays(field, rays, 0, rays.size(), render, backward ? &tape : nullptr);

  PatchLoss result;
  result.lr_render = Image(rays.grid_height, rays.grid_width, 3);
  for (std::size_t k = 0; k < rays.size(); ++k)
    for (int c = 0; c < 3; ++c) result.lr_render.data[3 * k + c] = out.rgb[k][c];

  SRNetwork::Tape sr_tape;
  if (sr) {
    if (sr->ratio() != ratio)
      throw ConfigError("SR ratio " + std::to_string(sr->ratio()) + " does not match patch ratio " +
                        std::to_string(ratio));
    result.prediction = backward ? sr->forward(result.lr_render, sr_tape) : sr->upscale(result.lr_render);
  } else {
    result.prediction = bilinear_upscale(result.lr_render, ratio);
  }
  const Image& pred = result.prediction;
  const Image& target = pair.hr_target;
  if (!pred.same_shape(target))
    throw ShapeError("patch prediction and target differ in shape");
  const bool masked = !pair.mask.empty();

  double count = 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < pred.pixel_count(); ++p) {
    if (masked && pair.mask.data[p] <= 0.0) continue;
    count += 3.0;
    for (int c = 0; c < 3; ++c) {
      const double d = pred.data[3 * p + c] - target.data[3 * p + c];
      sum += d * d;
    }
  }
  result.loss = count > 0.0 ? sum / count : 0.0;
  if (!std::isfinite(result.loss))
    throw NumericError("patch loss is not finite (patch at row " + std::to_string(pair.spec.row) +
                       ", col " + std::to_string(pair.spec.col) + ", size " +
                       std::to_string(pair.spec.size) + ")");
  if (!backward || count == 0.0) return result;

  Image grad(pred.height, pred.width, 3);
  for (std::size_t p = 0; p < pred.pixel_count(); ++p) {
    if (masked && pair.mask.data[p] <= 0.0) continue;
    for (int c = 0; c < 3; ++c)
      grad.data[3 * p + c] = 2.0 * (pred.data[3 * p + c] - target.data[3 * p + c]) / count;
  }
  const Image grad_lr = sr ? sr->backward(sr_tape, grad) : bilinear_upscale_backward(grad, ratio);
  std::vector<Vec3> grad_rgb(rays.size());
  for (std::size_t k = 0; k < rays.size(); ++k)
    grad_rgb[k] = Vec3(grad_lr.data[3 * k], grad_lr.data[3 * k + 1], grad_lr.data[3 * k + 2]);
  render_rays_backward(field, tape, grad_rgb);
  return result;
}

// ---------------------------------------------------------------------------
// End-to-end training

Pipeline TrainState::pipeline(const RenderConfig& render) const {
  Pipeline p;
  p.field = field.get();
  p.sr = sr.get();
  p.upscaler = sr ? Upscaler::Network : Upscaler::Bilinear;
  p.ratio = ratio;
  p.render = render;
  return p;
}

double TrainState::total_seconds() const {
  double total = 0.0;
  for (const auto& [phase, seconds] : wall_clock)
    if (phase != "validation") total += seconds;
  return total;
}

namespace {

void build_optimizer(TrainState& state, const TrainConfig& config) {
  state.optimizer = Adam(config.adam);
  state.optimizer.add_group("field.grid", state.field->grid_parameters(), config.learning_rate);
  state.optimizer.add_group("field.network", state.field->network_parameters(),
                            config.learning_rate);
  if (state.sr && trains_sr(state.strategy))
    state.optimizer.add_group("sr", state.sr->parameters(), config.learning_rate);
}

std::array<double, 3> training_means(std::span<const View> views) {
  std::vector<Image> images;
  images.reserve(views.size());
  for (const View& v : views) images.push_back(v.image);
  return channel_means(images);
}

void append_log(const std::filesystem::path& path, const EpochRecord& r) {
  std::ofstream out(path, std::ios::app);
  json line{{"epoch", r.epoch},
            {"iter", r.iteration},
            {"loss", r.loss},
            {"lr", r.lr},
            {"wall_seconds", r.wall_seconds}};
  if (r.val_psnr >= 0.0) line["val_psnr"] = r.val_psnr;
  out << line.dump() << "\n";
  if (!out) throw FormatError("cannot append to training log " + path.string());
}

std::string epoch_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
  return buf;
}

}  // namespace

TrainState make_train_state(RadianceField field, const SceneDataset& hr_dataset,
                            const TrainConfig& config, const SRNetwork* pretrained) {
  TrainState state;
  state.field = std::make_unique<RadianceField>(std::move(field));
  state.strategy = config.strategy;
  state.ratio = config.ratio;
  state.rng.seed(derive_seed(config.seed, 0xE2E));
  if (config.strategy != Strategy::Bilinear) {
    if (uses_pretrained_sr(config.strategy) && pretrained) {
      if (pretrained->ratio() != config.ratio)
        throw ConfigError("pretrained SR has ratio " + std::to_string(pretrained->ratio()) +
                          ", run uses " + std::to_string(config.ratio));
      state.sr = std::make_unique<SRNetwork>(*pretrained);
    } else {
      if (uses_pretrained_sr(config.strategy))
        std::cerr << "warning: no pretrained SR weights for strategy " << to_string(config.strategy)
                  << "; starting from a freshly initialized network\n";
      SRConfig sc = config.sr;
      sc.ratio = config.ratio;
      state.sr = std::make_unique<SRNetwork>(sc, derive_seed(config.seed, 0x5E));
      state.sr->set_mean_shift(training_means(hr_dataset.train));
    }
  }
  build_optimizer(state, config);
  return state;
}

void train_end_to_end(TrainState& state, std::span<const View> train_views,
                      std::span<const View> val_views, const TrainConfig& config,
                      const TrainOptions& options) {
  if (train_views.empty()) throw ConfigError("end-to-end training needs training views");
  const int total = config.resolved_epochs();
  const int patch = config.resolved_patch_size();
  const int ratio = state.ratio;
  const int height = train_views.front().image.height;
  const int width = train_views.front().image.width;
  for (const View& v : train_views)
    if (v.image.height != height || v.image.width != width)
      throw ShapeError("training views must share one resolution");
  if (patch > height || patch > width)
    throw ConfigError("patch size " + std::to_string(patch) + " exceeds the " +
                      std::to_string(width) + "x" + std::to_string(height) + " training images");

  const bool random = uses_random_patches(config.strategy);
  const std::vector<PatchSpec> grid = grid_patches(height, width, patch, ratio);
  state.grid_queues.resize(train_views.size());

  RenderConfig rc = config.render;
  rc.stratified = true;
  const std::uint64_t render_stream = derive_seed(config.seed, 0x7E11);
  const bool files = !options.out_dir.empty();
  if (files) std::filesystem::create_directories(options.out_dir / "checkpoints");

  std::vector<std::size_t> order(train_views.size());
  while (state.epoch < total) {
    if (options.stop_after_epoch >= 0 && state.epoch >= options.stop_after_epoch) break;
    const auto epoch_start = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), state.rng);
    double epoch_loss = 0.0;
    for (const std::size_t idx : order) {
      const View& view = train_views[idx];
      PatchSpec spec;
      if (random) {
        spec = random_patch(height, width, patch, state.rng, ratio);
      } else {
        auto& queue = state.grid_queues[idx];
        if (queue.empty()) {
          queue.resize(grid.size());
          std::iota(queue.begin(), queue.end(), 0);
          std::shuffle(queue.begin(), queue.end(), state.rng);
        }
        spec = grid[queue.back()];
        queue.pop_back();
      }
      PatchPair pair = make_patch_pair(view.image, view.camera, spec);
      if (config.augment) pair = augment_pair(pair, config.augmentation, state.rng);
      rc.seed = derive_seed(render_stream, static_cast<std::uint64_t>(state.iteration));
      state.field->zero_grad();
      if (state.sr) state.sr->zero_grad();
      double loss = 0.0;
      try {
        loss = compute_patch_loss(*state.field, state.sr.get(), rc, pair).loss;
      } catch (const NumericError&) {
        if (files) save_train_state(options.out_dir / "diverged.ckpt", state, config);
        throw;
      }
      state.optimizer.step();
      ++state.iteration;
      state.loss_history.push_back(loss);
      epoch_loss += loss;
    }
    ++state.epoch;
    state.wall_clock["end_to_end"] += seconds_since(epoch_start);

    EpochRecord record;
    record.epoch = state.epoch;
    record.iteration = state.iteration;
    record.loss = epoch_loss / static_cast<double>(train_views.size());
    record.lr = state.optimizer.groups().front().lr;
    record.wall_seconds = state.total_seconds();

    const bool boundary = state.epoch % config.checkpoint_every == 0 || state.epoch == total;
    if (boundary && config.validate_best && !val_views.empty()) {
      const auto val_start = Clock::now();
      const View& val = val_views.front();
      const Pipeline pipe = state.pipeline(config.render);
      const double value = std::min(psnr(render_pipeline(pipe, val.camera).hr, val.image), 99.0);
      record.val_psnr = value;
      if (value > state.best_val_psnr) {
        state.best_val_psnr = value;
        state.best_epoch = state.epoch;
        if (files) save_model(options.out_dir / "best.ckpt", state, config);
      }
      state.wall_clock["validation"] += seconds_since(val_start);
    }
    if (files && boundary) {
      save_model(options.out_dir / "checkpoints" / epoch_name(state.epoch), state, config);
      save_train_state(options.out_dir / "state.ckpt", state, config);
    }
    if (files) append_log(options.out_dir / "train_log.jsonl", record);
    if (options.on_epoch) options.on_epoch(record);
  }
  if (files && state.epoch >= total) save_model(options.out_dir / "final.ckpt", state, config);
}

std::vector<View> render_pseudo_views(const RadianceField& teacher, std::span<const View> train_views,
                                      int count, const RenderConfig& render, std::uint64_t seed) {
  std::vector<View> views;
  if (count <= 0) return views;
  if (train_views.size() < 2) throw ConfigError("pseudo views need at least two training poses");
  Rng rng(derive_seed(seed, 0xD157));
  std::uniform_int_distribution<std::size_t> pick(0, train_views.size() - 1);
  views.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::size_t a = pick(rng);
    const Vec3 origin = train_views[a].camera.origin();
    std::size_t b = a == 0 ? 1 : 0;
    for (std::size_t k = 0; k < train_views.size(); ++k) {
      if (k == a) continue;
      if ((train_views[k].camera.origin() - origin).squaredNorm() <
          (train_views[b].camera.origin() - origin).squaredNorm())
        b = k;
    }
    const double t = uniform01(rng);
    View view;
    char name[32];
    std::snprintf(name, sizeof name, "pseudo_%04d", i);
    view.name = name;
    view.camera = train_views[a].camera;
    view.camera.pose = interpolate_pose(train_views[a].camera.pose, train_views[b].camera.pose, t);
    view.image = render_image(teacher, view.camera, render).rgb;
    views.push_back(std::move(view));
  }
  return views;
}

void distill(const RadianceField& teacher, TrainState& state, const SceneDataset& hr_dataset,
             const TrainConfig& config, const TrainOptions& options) {
  const auto start = Clock::now();
  std::vector<View> views(hr_dataset.train.begin(), hr_dataset.train.end());
  std::vector<View> pseudo = render_pseudo_views(teacher, hr_dataset.train, config.distill_images,
                                                 config.render, config.seed);
  if (!options.out_dir.empty() && !pseudo.empty()) {
    const auto dir = options.out_dir / "pseudo";
    std::filesystem::create_directories(dir);
    for (const View& v : pseudo) write_png(dir / (v.name + ".png"), v.image);
  }
  views.insert(views.end(), std::make_move_iterator(pseudo.begin()),
               std::make_move_iterator(pseudo.end()));
  state.wall_clock["pseudo_data"] += seconds_since(start);
  train_end_to_end(state, views, hr_dataset.val, config, options);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_train_state(const std::filesystem::path& path, const TrainState& state,
                      const TrainConfig& config) {
  Archive archive;
  archive.kind = "train_state";
  state.field->save(archive);
  if (state.sr) state.sr->save(archive);
  state.optimizer.save(archive);
  archive.add("loss_history", {static_cast<std::int64_t>(state.loss_history.size())},
              Buffer(state.loss_history.begin(), state.loss_history.end()));
  for (std::size_t i = 0; i < state.grid_queues.size(); ++i)
    archive.add("grid_queue." + std::to_string(i),
                {static_cast<std::int64_t>(state.grid_queues[i].size())},
                to_doubles(state.grid_queues[i]));
  json meta = json::parse(archive.meta_json);
  meta["strategy"] = to_string(state.strategy);
  meta["ratio"] = state.ratio;
  meta["epoch"] = state.epoch;
  meta["iteration"] = state.iteration;
  meta["rng"] = rng_state(state.rng);
  meta["wall_clock"] = state.wall_clock;
  meta["grid_queues"] = state.grid_queues.size();
  meta["best_val_psnr"] = state.best_val_psnr;
  meta["best_epoch"] = state.best_epoch;
  meta["config"] = json::parse(train_config_json(config));
  archive.meta_json = meta.dump();
  save_archive(path, archive);
}

TrainState load_train_state(const std::filesystem::path& path, const TrainConfig& config) {
  const Archive archive = load_archive(path);
  if (archive.kind != "train_state")
    throw FormatError(path.string() + " is not a training-state checkpoint (kind '" + archive.kind +
                      "')");
  const json meta = json::parse(archive.meta_json);
  TrainState state;
  state.strategy = parse_strategy(meta.at("strategy").get<std::string>());
  if (state.strategy != config.strategy)
    throw ConfigError("checkpoint strategy " + to_string(state.strategy) +
                      " differs from the configured " + to_string(config.strategy));
  state.ratio = meta.at("ratio").get<int>();
  state.field = std::make_unique<RadianceField>(RadianceField::load(archive));
  if (meta.contains("sr")) state.sr = std::make_unique<SRNetwork>(SRNetwork::load(archive));
  build_optimizer(state, config);
  state.optimizer.load(archive);
  state.epoch = meta.at("epoch").get<int>();
  state.iteration = meta.at("iteration").get<std::int64_t>();
  restore_rng(state.rng, meta.at("rng").get<std::string>());
  state.wall_clock = meta.at("wall_clock").get<std::map<std::string, double>>();
  state.best_val_psnr = meta.at("best_val_psnr").get<double>();
  state.best_epoch = meta.at("best_epoch").get<int>();
  const Buffer& history = archive.at("loss_history").data;
  state.loss_history.assign(history.begin(), history.end());
  state.grid_queues.resize(meta.at("grid_queues").get<std::size_t>());
  for (std::size_t i = 0; i < state.grid_queues.size(); ++i)
    for (double v : archive.at("grid_queue." + std::to_string(i)).data)
      state.grid_queues[i].push_back(static_cast<int>(v));
  return state;
}

Pipeline Model::pipeline(const RenderConfig& render) const {
  Pipeline p;
  p.field = &field;
  p.sr = sr.get();
  p.upscaler = upscaler;
  p.ratio = ratio;
  p.render = render;
  return p;
}

void save_model(const std::filesystem::path& path, const RadianceField& field, const SRNetwork* sr,
                int ratio, const std::string& config_json) {
  Archive archive;
  archive.kind = "model";
  field.save(archive);
  if (sr) sr->save(archive);
  json meta = json::parse(archive.meta_json);
  meta["ratio"] = ratio;
  meta["upscaler"] = sr ? "network" : (ratio == 1 ? "none" : "bilinear");
  meta["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  archive.meta_json = meta.dump();
  save_archive(path, archive);
}

void save_model(const std::filesystem::path& path, const TrainState& state,
                const TrainConfig& config) {
  save_model(path, *state.field, state.sr.get(), state.ratio, train_config_json(config));
}

Model load_model(const std::filesystem::path& path) {
  const Archive archive = load_archive(path);
  if (archive.kind != "model" && archive.kind != "train_state")
    throw FormatError(path.string() + " holds no trained model (kind '" + archive.kind + "')");
  const json meta = json::parse(archive.meta_json);
  Model model;
  model.field = RadianceField::load(archive);
  model.ratio = meta.value("ratio", 1);
  if (meta.contains("sr")) {
    model.sr = std::make_unique<SRNetwork>(SRNetwork::load(archive));
    model.upscaler = Upscaler::Network;
  } else {
    model.upscaler = model.ratio == 1 ? Upscaler::None : Upscaler::Bilinear;
  }
  if (meta.contains("config")) model.config_json = meta["config"].dump();
  return model;
}

// ---------------------------------------------------------------------------
// Network pretraining

namespace {

struct Shape {
  enum class Kind { Rect, Disc, Stripes, Checker } kind;
  Vec2 center;
  Vec2 half;          // rect half sizes / disc radius in x
  double angle = 0.0;
  double period = 4.0;
  Vec3 color_a;
  Vec3 color_b;

  bool inside(const Vec2& p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const Vec2 d = p - center;
    const Vec2 q(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
    if (kind == Kind::Disc) return q.squaredNorm() <= half.x() * half.x();
    return std::abs(q.x()) <= half.x() && std::abs(q.y()) <= half.y();
  }

  Vec3 color(const Vec2& p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const Vec2 d = p - center;
    const Vec2 q(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
    if (kind == Kind::Stripes) return std::fmod(std::floor(q.x() / period), 2.0) == 0.0 ? color_a : color_b;
    if (kind == Kind::Checker) {
      const auto cell = static_cast<long>(std::floor(q.x() / period) + std::floor(q.y() / period));
      return (cell % 2 == 0) ? color_a : color_b;
    }
    return color_a;
  }
};

Vec3 random_color(Rng& rng) { return Vec3(uniform01(rng), uniform01(rng), uniform01(rng)); }

}  // namespace

Image procedural_image(int height, int width, Rng& rng) {
  const Vec3 top = random_color(rng);
  const Vec3 bottom = random_color(rng);
  const int n_shapes = 3 + static_cast<int>(uniform01(rng) * 6.0);
  const double size = std::max(height, width);
  std::vector<Shape> shapes;
  for (int i = 0; i < n_shapes; ++i) {
    Shape s;
    s.kind = static_cast<Shape::Kind>(static_cast<int>(uniform01(rng) * 4.0) % 4);
    s.center = Vec2(uniform01(rng) * width, uniform01(rng) * height);
    s.half = Vec2((0.1 + 0.4 * uniform01(rng)) * size, (0.1 + 0.4 * uniform01(rng)) * size);
    s.angle = uniform01(rng) * 3.14159265358979;
    s.period = 1.5 + 8.0 * uniform01(rng);
    s.color_a = random_color(rng);
    s.color_b = random_color(rng);
    shapes.push_back(s);
  }
  constexpr int kSub = 3;
  Image image(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Vec3 acc = Vec3::Zero();
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const Vec2 p(x + (sx + 0.5) / kSub, y + (sy + 0.5) / kSub);
          const double f = p.y() / height;
          Vec3 c = (1.0 - f) * top + f * bottom;
          for (const Shape& s : shapes)
            if (s.inside(p)) c = s.color(p);
          acc += c;
        }
      }
      acc /= kSub * kSub;
      for (int c = 0; c < 3; ++c) image(y, x, c) = acc[c];
    }
  }
  return image;
}

std::pair<SRNetwork, std::vector<double>> pretrain_sr(const PretrainConfig& config,
                                                      const std::function<void(int, double)>& on_log) {
  SRConfig sc = config.sr;
  sc.ratio = config.ratio;
  SRNetwork net(sc, derive_seed(config.seed, 0x9E7));
  Adam opt;
  opt.add_group("sr", net.parameters(), config.learning_rate);
  Rng rng(derive_seed(config.seed, 0x9E8));
  const int size = std::max(config.patch_size, 8 * config.ratio) / config.ratio * config.ratio;
  std::vector<double> losses;
  losses.reserve(config.iterations);
  for (int it = 0; it < config.iterations; ++it) {
    const Image hr = procedural_image(size, size, rng);
    const Image lr = bilinear_downsample(hr, config.ratio);
    opt.zero_grad();
    SRNetwork::Tape tape;
    const Image pred = net.forward(lr, tape);
    Image grad(pred.height, pred.width, 3);
    double loss = 0.0;
    const double n = static_cast<double>(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const double d = pred.data[i] - hr.data[i];
      loss += d * d;
      grad.data[i] = 2.0 * d / n;
    }
    loss /= n;
    if (!std::isfinite(loss)) throw NumericError("SR pretraining diverged at iteration " + std::to_string(it));
    net.backward(tape, grad);
    opt.step();
    losses.push_back(loss);
    if (on_log && ((it + 1) % 100 == 0 || it + 1 == config.iterations)) on_log(it + 1, loss);
  }
  return {std::move(net), std::move(losses)};
}

}  // namespace nerfsr
