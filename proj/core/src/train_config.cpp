// Copyright 2026 The nerfsr Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0
#include "nerfsr/train_config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

namespace nerfsr {

using json = nlohmann::ordered_json;

namespace {

struct StrategyName {
  Strategy strategy;
  const char* name;
};

constexpr StrategyName kStrategies[] = {
    {Strategy::Bilinear, "bilinear"},         {Strategy::Pretrained, "pretrained"},
    {Strategy::Scratch, "scratch"},           {Strategy::FTGridPatch, "ft-gridpatch"},
    {Strategy::FTRandPatch, "ft-randpatch"},  {Strategy::Distillation, "distillation"},
};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

// Reads keys from one JSON object, recording type errors and unknown keys
// instead of throwing so that every problem can be reported at once.
class Reader {
 public:
  Reader(const json& object, std::string path, std::vector<std::string>& errors)
      : object_(object), path_(std::move(path)), errors_(errors) {
    if (!object_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  ~Reader() {
    if (!object_.is_object()) return;
    for (const auto& item : object_.items())
      if (!seen_.count(item.key())) errors_.push_back(where(item.key()) + ": unknown key");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!object_.is_object() || !object_.contains(key)) return;
    try {
      out = object_.at(key).template get<T>();
    } catch (const json::exception&) {
      errors_.push_back(where(key) + ": wrong type (" + object_.at(key).dump() + ")");
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    std::array<double, 3> a{out.x(), out.y(), out.z()};
    get(key, a);
    out = Vec3(a[0], a[1], a[2]);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!object_.is_object() || !object_.contains(key)) return nullptr;
    return &object_.at(key);
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& object_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_field(const json& j, FieldConfig& c, std::vector<std::string>& errors) {
  Reader r(j, "field", errors);
  r.get_vec3("box_min", c.box.lo);
  r.get_vec3("box_max", c.box.hi);
  r.get("resolution", c.resolution);
  r.get("density_rank", c.density_rank);
  r.get("appearance_rank", c.appearance_rank);
  r.get("appearance_channels", c.appearance_channels);
  r.get("hidden_width", c.hidden_width);
  r.get("view_frequencies", c.view_frequencies);
  r.get("density_shift", c.density_shift);
  r.get("density_scale", c.density_scale);
  r.get("density_affine", c.density_affine);
  r.get("init_scale", c.init_scale);
}

void read_sr(const json& j, SRConfig& c, std::vector<std::string>& errors) {
  Reader r(j, "sr", errors);
  r.get("n_blocks", c.n_blocks);
  r.get("n_channels", c.n_channels);
  r.get("residual_scale", c.residual_scale);
  r.get("mean_shift", c.mean_shift);
}

void read_render(const json& j, RenderConfig& c, std::vector<std::string>& errors) {
  Reader r(j, "render", errors);
  r.get("n_samples", c.n_samples);
  r.get("stratified", c.stratified);
  r.get_vec3("background", c.background);
  r.get("chunk_size", c.chunk_size);
  r.get("weight_threshold", c.weight_threshold);
}

void read_warmup(const json& j, WarmupConfig& c, std::vector<std::string>& errors) {
  Reader r(j, "warmup", errors);
  r.get("iterations", c.iterations);
  r.get("batch_rays", c.batch_rays);
  r.get("lr_grid", c.lr_grid);
  r.get("lr_network", c.lr_network);
  r.get("lr_decay_target", c.lr_decay_target);
  r.get("upsample_iters", c.upsample_iters);
  r.get("final_resolution", c.final_resolution);
  r.get("n_samples", c.n_samples);
}

}  // namespace

std::string to_string(Strategy strategy) {
  for (const auto& s : kStrategies)
    if (s.strategy == strategy) return s.name;
  return "unknown";
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : kStrategies) out.emplace_back(s.name);
    return out;
  }();
  return names;
}

Strategy parse_strategy(const std::string& name) {
  std::string key = lower(name);
  std::replace(key.begin(), key.end(), '_', '-');
  for (const auto& s : kStrategies)
    if (key == s.name) return s.strategy;
  throw ConfigError("unknown strategy '" + name + "'; valid strategies: " +
                    join(strategy_names(), ", "));
}

bool trains_sr(Strategy s) {
  return s == Strategy::Scratch || s == Strategy::FTGridPatch || s == Strategy::FTRandPatch ||
         s == Strategy::Distillation;
}

bool uses_pretrained_sr(Strategy s) {
  return s == Strategy::Pretrained || s == Strategy::FTGridPatch || s == Strategy::FTRandPatch ||
         s == Strategy::Distillation;
}

bool uses_random_patches(Strategy s) { return s == Strategy::FTRandPatch; }

int TrainConfig::resolved_epochs() const {
  if (epochs >= 0) return epochs;
  return strategy == Strategy::Distillation ? 100 : 150;
}

int TrainConfig::resolved_patch_size() const {
  const auto it = patch_size.find(ratio);
  if (it == patch_size.end())
    throw ConfigError("no patch size configured for ratio " + std::to_string(ratio));
  return it->second;
}

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> p;
  auto need = [&p](bool ok, const std::string& message) {
    if (!ok) p.push_back(message);
  };
  need(schema_version == kTrainConfigSchemaVersion,
       "schema_version " + std::to_string(schema_version) + " is not supported (expected " +
           std::to_string(kTrainConfigSchemaVersion) + ")");
  need(ratio == 2 || ratio == 4 || ratio == 8, "ratio must be 2, 4 or 8");
  need(learning_rate > 0.0, "learning_rate must be positive");
  need(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam.beta1 must lie in [0, 1)");
  need(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam.beta2 must lie in [0, 1)");
  need(adam.eps > 0.0, "adam.eps must be positive");
  need(checkpoint_every >= 1, "checkpoint_every must be at least 1");
  need(device == "cpu", "device '" + device + "' is not available (only 'cpu')");
  need(distill_images >= 0, "distill_images must be non-negative");

  const auto it = patch_size.find(ratio);
  if (it == patch_size.end()) {
    p.push_back("patch_size has no entry for ratio " + std::to_string(ratio));
  } else {
    need(it->second > 0 && it->second % ratio == 0,
         "patch_size for ratio " + std::to_string(ratio) + " must be a positive multiple of it");
    need(it->second / std::max(ratio, 1) >= 8, "patch_size / ratio must be at least 8");
  }

  need(augmentation.max_rotation_deg >= 0.0 && augmentation.max_rotation_deg < 45.0,
       "augmentation.max_rotation_deg must lie in [0, 45)");
  need(augmentation.hflip_prob >= 0.0 && augmentation.hflip_prob <= 1.0,
       "augmentation.hflip_prob must lie in [0, 1]");

  need(warmup.iterations >= 0, "warmup.iterations must be non-negative");
  need(warmup.batch_rays >= 1, "warmup.batch_rays must be positive");
  need(warmup.lr_grid > 0.0 && warmup.lr_network > 0.0, "warmup learning rates must be positive");
  need(warmup.lr_decay_target > 0.0 && warmup.lr_decay_target <= 1.0,
       "warmup.lr_decay_target must lie in (0, 1]");
  need(std::is_sorted(warmup.upsample_iters.begin(), warmup.upsample_iters.end()),
       "warmup.upsample_iters must be sorted");
  need(warmup.n_samples >= 1, "warmup.n_samples must be positive");
  for (int a = 0; a < 3; ++a)
    need(warmup.final_resolution[a] >= field.resolution[a],
         "warmup.final_resolution must not be below field.resolution");

  for (int a = 0; a < 3; ++a) need(field.resolution[a] >= 2, "field.resolution entries must be >= 2");
  need((field.box.hi - field.box.lo).minCoeff() > 0.0, "field box must have positive extent");
  need(field.density_rank >= 1 && field.appearance_rank >= 1, "field ranks must be positive");
  need(field.appearance_channels >= 1, "field.appearance_channels must be positive");
  need(field.hidden_width >= 1, "field.hidden_width must be positive");
  need(field.view_frequencies >= 0, "field.view_frequencies must be non-negative");
  need(field.density_scale > 0.0, "field.density_scale must be positive");

  need(sr.n_blocks >= 0, "sr.n_blocks must be non-negative");
  need(sr.n_channels >= 1, "sr.n_channels must be positive");

  need(render.n_samples >= 1, "render.n_samples must be positive");
  need(render.chunk_size >= 1, "render.chunk_size must be positive");
  need(render.weight_threshold >= 0.0 && render.weight_threshold < 1.0,
       "render.weight_threshold must lie in [0, 1)");
  return p;
}

void TrainConfig::validate() const {
  const auto p = problems();
  if (!p.empty()) throw ConfigError("invalid training config:\n  " + join(p, "\n  "));
}

std::string train_config_json(const TrainConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["strategy"] = to_string(c.strategy);
  j["ratio"] = c.ratio;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  json patch = json::object();
  for (const auto& [r, size] : c.patch_size) patch[std::to_string(r)] = size;
  j["patch_size"] = patch;
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
  j["seed"] = c.seed;
  j["device"] = c.device;
  j["augment"] = c.augment;
  j["augmentation"] = {{"max_rotation_deg", c.augmentation.max_rotation_deg},
                       {"hflip_prob", c.augmentation.hflip_prob}};
  j["checkpoint_every"] = c.checkpoint_every;
  j["validate_best"] = c.validate_best;
  j["warmup"] = {{"iterations", c.warmup.iterations},
                 {"batch_rays", c.warmup.batch_rays},
                 {"lr_grid", c.warmup.lr_grid},
                 {"lr_network", c.warmup.lr_network},
                 {"lr_decay_target", c.warmup.lr_decay_target},
                 {"upsample_iters", c.warmup.upsample_iters},
                 {"final_resolution", c.warmup.final_resolution},
                 {"n_samples", c.warmup.n_samples}};
  const FieldConfig& f = c.field;
  j["field"] = {{"box_min", vec3(f.box.lo)},
                {"box_max", vec3(f.box.hi)},
                {"resolution", f.resolution},
                {"density_rank", f.density_rank},
                {"appearance_rank", f.appearance_rank},
                {"appearance_channels", f.appearance_channels},
                {"hidden_width", f.hidden_width},
                {"view_frequencies", f.view_frequencies},
                {"density_shift", f.density_shift},
                {"density_scale", f.density_scale},
                {"density_affine", f.density_affine},
                {"init_scale", f.init_scale}};
  j["sr"] = {{"n_blocks", c.sr.n_blocks},
             {"n_channels", c.sr.n_channels},
             {"residual_scale", c.sr.residual_scale},
             {"mean_shift", c.sr.mean_shift}};
  j["render"] = {{"n_samples", c.render.n_samples},
                 {"stratified", c.render.stratified},
                 {"background", vec3(c.render.background)},
                 {"chunk_size", c.render.chunk_size},
                 {"weight_threshold", c.render.weight_threshold}};
  j["pretrained_sr"] = c.pretrained_sr;
  j["teacher_checkpoint"] = c.teacher_checkpoint;
  j["distill_images"] = c.distill_images;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text, const TrainConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainConfig c = base;
  std::vector<std::string> errors;
  {
    Reader r(j, "", errors);
    r.get("schema_version", c.schema_version);
    std::string strategy;
    r.get("strategy", strategy);
    if (!strategy.empty()) {
      try {
        c.strategy = parse_strategy(strategy);
      } catch (const ConfigError& e) {
        errors.emplace_back(e.what());
      }
    }
    r.get("ratio", c.ratio);
    r.get("epochs", c.epochs);
    r.get("learning_rate", c.learning_rate);
    if (const json* p = r.child("patch_size")) {
      if (!p->is_object()) {
        errors.emplace_back("patch_size: expected an object keyed by ratio");
      } else {
        for (const auto& item : p->items()) {
          try {
            c.patch_size[std::stoi(item.key())] = item.value().get<int>();
          } catch (const std::exception&) {
            errors.push_back("patch_size." + item.key() + ": expected integer ratio and size");
          }
        }
      }
    }
    if (const json* a = r.child("adam")) {
      Reader ra(*a, "adam", errors);
      ra.get("beta1", c.adam.beta1);
      ra.get("beta2", c.adam.beta2);
      ra.get("eps", c.adam.eps);
    }
    r.get("seed", c.seed);
    r.get("device", c.device);
    r.get("augment", c.augment);
    if (const json* a = r.child("augmentation")) {
      Reader ra(*a, "augmentation", errors);
      ra.get("max_rotation_deg", c.augmentation.max_rotation_deg);
      ra.get("hflip_prob", c.augmentation.hflip_prob);
    }
    r.get("checkpoint_every", c.checkpoint_every);
    r.get("validate_best", c.validate_best);
    if (const json* w = r.child("warmup")) read_warmup(*w, c.warmup, errors);
    if (const json* f = r.child("field")) read_field(*f, c.field, errors);
    if (const json* s = r.child("sr")) read_sr(*s, c.sr, errors);
    if (const json* s = r.child("render")) read_render(*s, c.render, errors);
    r.get("pretrained_sr", c.pretrained_sr);
    r.get("teacher_checkpoint", c.teacher_checkpoint);
    r.get("distill_images", c.distill_images);
  }
  c.sr.ratio = c.ratio;
  for (auto& p : c.problems()) errors.push_back(std::move(p));
  if (!errors.empty()) throw ConfigError("invalid training config:\n  " + join(errors, "\n  "));
  return c;
}

std::uint64_t config_fingerprint(const TrainConfig& config) {
  const std::string text = train_config_json(config);
  return fnv1a(text.data(), text.size());
}

}  // namespace nerfsr
