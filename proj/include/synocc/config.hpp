#pragma once

#include "synocc/augment.hpp"
#include "synocc/camera.hpp"
#include "synocc/heatmap.hpp"
#include "synocc/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace synocc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat JSON configuration shared by every subcommand. Unknown keys are errors.
struct RunConfig {
  double focal_length = 1500.0;
  double p_occ = 0.5;
  int out_size = 256;
  double fill = 0.9;
  int J = 17;
  int D = 16;
  int Dz = 32;
  double depth_range_mm = 10000.0;
  std::uint64_t seed = 0;
  int thread_count = 1;

  // Heatmap grid
  int heatmap_size = 16;
  double rel_depth_half_range_mm = 1000.0;
  std::string crop_mode = "rotational";

  // Occlusion and the other augmentations
  int occluder_count_min = 1;
  int occluder_count_max = 8;
  double occluder_scale_min = 0.1;
  double occluder_scale_max = 0.7;
  double max_rotation_deg = 20.0;
  double max_translation_frac = 0.05;
  double zoom_min = 0.85;
  double zoom_max = 1.15;
  double hflip_prob = 0.5;
  double blur_sigma_max = 2.0;
  double gain_min = 0.8;
  double gain_max = 1.2;

  // Toy trainer
  int steps = 500;
  double base_lr = 0.5;
  double max_lr = 5.0;
  int lr_period = 100;
  bool learn_c = false;
  double c_init = 1.0;
  double c_true = 1.0;
  double c_lr_scale = 1e-6;
  double depth_axis_lr_scale = 0.1;
  double depth_head_lr_scale = 0.02;
  std::string loss_space = "root_relative";
  int toy_samples = 4;

  void validate() const;

  GridSpec grid_spec() const;
  AugmentConfig augment_config() const;
  CropOptions crop_options() const;
  ToyTrainConfig toy_config() const;
  SyntheticSetOptions synthetic_options() const;

  nlohmann::json to_json() const;
  /// Starts from the defaults and applies every key of `j`.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "SYNOCC_CONFIG";

/// Explicit path first, then $SYNOCC_CONFIG, then defaults.
RunConfig load_run_config(const std::optional<std::filesystem::path>& explicit_path);

void write_effective_config(const std::filesystem::path& dir, const nlohmann::json& config);

}  // namespace synocc
