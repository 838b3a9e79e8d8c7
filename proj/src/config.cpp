#include "synocc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace synocc {

namespace {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <typename T>
Setter set(T RunConfig::*member) {
  return [member](RunConfig& c, const nlohmann::json& v) { c.*member = v.get<T>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"focal_length", set(&RunConfig::focal_length)},
      {"p_occ", set(&RunConfig::p_occ)},
      {"out_size", set(&RunConfig::out_size)},
      {"fill", set(&RunConfig::fill)},
      {"J", set(&RunConfig::J)},
      {"D", set(&RunConfig::D)},
      {"Dz", set(&RunConfig::Dz)},
      {"depth_range_mm", set(&RunConfig::depth_range_mm)},
      {"seed", set(&RunConfig::seed)},
      {"thread_count", set(&RunConfig::thread_count)},
      {"heatmap_size", set(&RunConfig::heatmap_size)},
      {"rel_depth_half_range_mm", set(&RunConfig::rel_depth_half_range_mm)},
      {"crop_mode", set(&RunConfig::crop_mode)},
      {"occluder_count_min", set(&RunConfig::occluder_count_min)},
      {"occluder_count_max", set(&RunConfig::occluder_count_max)},
      {"occluder_scale_min", set(&RunConfig::occluder_scale_min)},
      {"occluder_scale_max", set(&RunConfig::occluder_scale_max)},
      {"max_rotation_deg", set(&RunConfig::max_rotation_deg)},
      {"max_translation_frac", set(&RunConfig::max_translation_frac)},
      {"zoom_min", set(&RunConfig::zoom_min)},
      {"zoom_max", set(&RunConfig::zoom_max)},
      {"hflip_prob", set(&RunConfig::hflip_prob)},
      {"blur_sigma_max", set(&RunConfig::blur_sigma_max)},
      {"gain_min", set(&RunConfig::gain_min)},
      {"gain_max", set(&RunConfig::gain_max)},
      {"steps", set(&RunConfig::steps)},
      {"base_lr", set(&RunConfig::base_lr)},
      {"max_lr", set(&RunConfig::max_lr)},
      {"lr_period", set(&RunConfig::lr_period)},
      {"learn_c", set(&RunConfig::learn_c)},
      {"c_init", set(&RunConfig::c_init)},
      {"c_true", set(&RunConfig::c_true)},
      {"c_lr_scale", set(&RunConfig::c_lr_scale)},
      {"depth_axis_lr_scale", set(&RunConfig::depth_axis_lr_scale)},
      {"depth_head_lr_scale", set(&RunConfig::depth_head_lr_scale)},
      {"loss_space", set(&RunConfig::loss_space)},
      {"toy_samples", set(&RunConfig::toy_samples)},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(focal_length > 0, "focal_length must be positive");
  require(out_size > 0, "out_size must be positive");
  require(fill > 0 && fill <= 1, "fill must be in (0, 1]");
  require(J >= 1 && D >= 1 && Dz >= 1, "J, D and Dz must be positive");
  require(heatmap_size >= 1, "heatmap_size must be positive");
  require(depth_range_mm > 0 && rel_depth_half_range_mm > 0, "depth ranges must be positive");
  require(thread_count >= 1, "thread_count must be at least 1");
  require(steps >= 1, "steps must be at least 1");
  require(toy_samples >= 1, "toy_samples must be at least 1");
  require(c_init > 0 && c_true > 0, "c_init and c_true must be positive");
  try {
    parse_crop_mode(crop_mode);
    parse_loss_space(loss_space);
    augment_config().validate();
    toy_config().schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

GridSpec RunConfig::grid_spec() const {
  GridSpec g;
  g.crop_width = out_size;
  g.crop_height = out_size;
  g.heatmap_width = heatmap_size;
  g.heatmap_height = heatmap_size;
  g.depth_bins = D;
  g.rel_depth_half_range_mm = rel_depth_half_range_mm;
  g.abs_depth_bins = Dz;
  g.abs_depth_range_mm = depth_range_mm;
  return g;
}

AugmentConfig RunConfig::augment_config() const {
  AugmentConfig a;
  a.occlusion = {p_occ, occluder_count_min, occluder_count_max, occluder_scale_min, occluder_scale_max};
  a.geometric = {max_rotation_deg, max_translation_frac, zoom_min, zoom_max, hflip_prob};
  a.appearance = {blur_sigma_max, gain_min, gain_max};
  a.crop_size = out_size;
  return a;
}

CropOptions RunConfig::crop_options() const {
  return {out_size, fill, parse_crop_mode(crop_mode)};
}

ToyTrainConfig RunConfig::toy_config() const {
  ToyTrainConfig t;
  t.steps = steps;
  t.schedule = {base_lr, max_lr, lr_period};
  t.seed = seed;
  t.joints = J;
  t.grid = grid_spec();
  t.learn_c = learn_c;
  t.c_init = c_init;
  t.c_lr_scale = c_lr_scale;
  t.depth_axis_lr_scale = depth_axis_lr_scale;
  t.depth_head_lr_scale = depth_head_lr_scale;
  t.loss_space = parse_loss_space(loss_space);
  t.threads = thread_count;
  return t;
}

SyntheticSetOptions RunConfig::synthetic_options() const {
  SyntheticSetOptions s;
  s.samples = toy_samples;
  s.joints = J;
  s.focal = focal_length;
  s.c_true = c_true;
  s.grid = grid_spec();
  s.seed = seed;
  return s;
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"focal_length", focal_length},
      {"p_occ", p_occ},
      {"out_size", out_size},
      {"fill", fill},
      {"J", J},
      {"D", D},
      {"Dz", Dz},
      {"depth_range_mm", depth_range_mm},
      {"seed", seed},
      {"thread_count", thread_count},
      {"heatmap_size", heatmap_size},
      {"rel_depth_half_range_mm", rel_depth_half_range_mm},
      {"crop_mode", crop_mode},
      {"occluder_count_min", occluder_count_min},
      {"occluder_count_max", occluder_count_max},
      {"occluder_scale_min", occluder_scale_min},
      {"occluder_scale_max", occluder_scale_max},
      {"max_rotation_deg", max_rotation_deg},
      {"max_translation_frac", max_translation_frac},
      {"zoom_min", zoom_min},
      {"zoom_max", zoom_max},
      {"hflip_prob", hflip_prob},
      {"blur_sigma_max", blur_sigma_max},
      {"gain_min", gain_min},
      {"gain_max", gain_max},
      {"steps", steps},
      {"base_lr", base_lr},
      {"max_lr", max_lr},
      {"lr_period", lr_period},
      {"learn_c", learn_c},
      {"c_init", c_init},
      {"c_true", c_true},
      {"c_lr_scale", c_lr_scale},
      {"depth_axis_lr_scale", depth_axis_lr_scale},
      {"depth_head_lr_scale", depth_head_lr_scale},
      {"loss_space", loss_space},
      {"toy_samples", toy_samples},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig config;
  for (const auto& [key, value] : j.items()) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(config, value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad value for config key '" + key + "': " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path) return RunConfig::load(*explicit_path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return RunConfig::load(env);
  return RunConfig{};
}

void write_effective_config(const std::filesystem::path& dir, const nlohmann::json& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "effective_config.json");
  if (!out) throw ConfigError("cannot write effective_config.json in " + dir.string());
  out << config.dump(2) << '\n';
}

}  // namespace synocc
