#pragma once

#include "synocc/camera.hpp"
#include "synocc/image.hpp"
#include "synocc/metrics.hpp"
#include "synocc/pose.hpp"
#include "synocc/voc.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synocc {

struct OcclusionConfig {
  double p_occ = 0.5;
  int count_min = 1;
  int count_max = 8;
  // Occluder size as a fraction of the crop side (larger cutout side after scaling).
  double scale_min = 0.1;
  double scale_max = 0.7;

  void validate() const;
};

struct GeometricConfig {
  double max_rotation_deg = 20.0;
  double max_translation_frac = 0.05;  // of the crop side, per axis
  double zoom_min = 0.85;
  double zoom_max = 1.15;
  double hflip_prob = 0.5;

  void validate() const;
  static GeometricConfig disabled() { return {0.0, 0.0, 1.0, 1.0, 0.0}; }
};

struct AppearanceConfig {
  double blur_sigma_max = 2.0;
  double gain_min = 0.8;
  double gain_max = 1.2;

  void validate() const;
  static AppearanceConfig disabled() { return {0.0, 1.0, 1.0}; }
};

struct AugmentConfig {
  OcclusionConfig occlusion;
  GeometricConfig geometric;
  AppearanceConfig appearance;
  int crop_size = 256;

  void validate() const;
};

struct AugParams {
  bool occlude = false;
  std::vector<int> occluder_ids;
  std::vector<Eigen::Vector2d> positions;  // cutout centers, crop pixels
  std::vector<double> scales;              // fractions of the crop side
  double rotation_deg = 0.0;
  Eigen::Vector2d translation_px = Eigen::Vector2d::Zero();
  double zoom = 1.0;
  bool hflip = false;
  double blur_sigma = 0.0;
  std::array<double, 3> color_gains{1.0, 1.0, 1.0};

  static AugParams identity() { return {}; }
  friend bool operator==(const AugParams&, const AugParams&) = default;
};

struct OcclusionRecord {
  std::string frame_id;
  AugParams params;
  double covered_fraction = 0.0;
};

/// Pure function of (config, library_size, seed, frame_id). The per-frame generator is
/// keyed on (seed, frame_id), so results do not depend on processing order.
AugParams sample_params(const AugmentConfig& config, std::size_t library_size, std::uint64_t seed,
                        std::string_view frame_id);

/// Resamples the cutout by `scale` (bilinear color, nearest alpha) and composites it centered
/// at `center`. Only pixels inside the clipped cutout rectangle can change. If `coverage` is
/// given (one channel, same size as image) pixels receiving nonzero alpha are set to 255.
/// Returns false, leaving the image untouched, when the scaled cutout has no pixels.
bool paste_into(Image& image, const SegmentedObject& cutout, const Eigen::Vector2d& center,
                double scale, Image* coverage = nullptr);

/// Value-returning form; `warning` receives a message for the zero-size no-op case.
Image paste(const Image& image, const SegmentedObject& cutout, const Eigen::Vector2d& center,
            double scale, std::string* warning = nullptr);

struct OcclusionResult {
  Image image;
  OcclusionRecord record;
  std::vector<std::string> warnings;
};

/// Pastes params.occluder_ids in list order. covered_fraction is the area of the union of
/// pasted alphas over the frame area.
OcclusionResult occlude_frame(const Image& image, const OccluderLibrary& library,
                              const AugParams& params, const std::string& frame_id = {});

/// Crop-space similarity for the geometric parameters: horizontal flip about the vertical
/// centerline, then rotation and zoom about the crop center, then translation.
Eigen::Matrix3d augmentation_similarity(const AugParams& params, int crop_width, int crop_height);

struct GeometricResult {
  Image image;
  std::optional<Pose3D> pose;
  CropTransform crop;
};

/// Composes the similarity into the crop warp and warps `image` (the uncropped frame). A pose
/// gets the matching camera-space transform: rotation about the optical axis and, for hflip,
/// X negation with the left/right permutation of `flip_map`. Zoom and translation change only
/// the crop.
GeometricResult geometric_augment(const Image& image, const std::optional<Pose3D>& pose,
                                  const AugParams& params, const CropTransform& crop,
                                  const JointFlipMap* flip_map = nullptr);

/// Gaussian blur (skipped for sigma 0) followed by per-channel gains, clamped to [0, 255].
Image appearance_augment(const Image& image, const AugParams& params);

nlohmann::json to_json(const AugParams& params);
nlohmann::json to_json(const OcclusionRecord& record);

}  // namespace synocc
