#include "synocc/augment.hpp"

#include "synocc/rng.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace synocc {

void OcclusionConfig::validate() const {
  if (!(p_occ >= 0.0 && p_occ <= 1.0)) throw std::invalid_argument("p_occ must be in [0, 1]");
  if (count_min < 1 || count_min > count_max) {
    throw std::invalid_argument("occluder counts need 1 <= count_min <= count_max");
  }
  if (!(scale_min > 0.0) || scale_min > scale_max) {
    throw std::invalid_argument("occluder scale range must satisfy 0 < min <= max");
  }
}

void GeometricConfig::validate() const {
  if (!(max_rotation_deg >= 0.0) || !(max_translation_frac >= 0.0)) {
    throw std::invalid_argument("geometric ranges must be nonnegative");
  }
  if (!(zoom_min > 0.0) || zoom_min > zoom_max) {
    throw std::invalid_argument("zoom range must satisfy 0 < min <= max");
  }
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
    throw std::invalid_argument("hflip_prob must be in [0, 1]");
  }
}

void AppearanceConfig::validate() const {
  if (!(blur_sigma_max >= 0.0)) throw std::invalid_argument("blur_sigma_max must be >= 0");
  if (!(gain_min > 0.0) || gain_min > gain_max) {
    throw std::invalid_argument("gain range must satisfy 0 < min <= max");
  }
}

void AugmentConfig::validate() const {
  occlusion.validate();
  geometric.validate();
  appearance.validate();
  if (crop_size <= 0) throw std::invalid_argument("crop_size must be positive");
}

AugParams sample_params(const AugmentConfig& config, std::size_t library_size, std::uint64_t seed,
                        std::string_view frame_id) {
  config.validate();
  Rng rng = Rng::for_frame(seed, frame_id);
  AugParams params;

  // Every draw happens regardless of earlier outcomes so that each field's stream
  // position is fixed.
  params.occlude = rng.bernoulli(config.occlusion.p_occ);
  const auto count = static_cast<int>(
      rng.uniform_int(config.occlusion.count_min, config.occlusion.count_max));
  const double side = config.crop_size;
  for (int i = 0; i < count; ++i) {
    const std::int64_t id =
        library_size > 0 ? rng.uniform_int(0, static_cast<std::int64_t>(library_size) - 1) : -1;
    const double px = rng.uniform(0.0, side);
    const double py = rng.uniform(0.0, side);
    const double scale = rng.uniform(config.occlusion.scale_min, config.occlusion.scale_max);
    if (params.occlude) {
      params.occluder_ids.push_back(static_cast<int>(id));
      params.positions.emplace_back(px, py);
      params.scales.push_back(scale);
    }
  }
  if (params.occlude && library_size == 0) {
    throw std::invalid_argument("sample_params: occlusion requested with an empty library");
  }

  const GeometricConfig& g = config.geometric;
  params.rotation_deg = rng.uniform(-g.max_rotation_deg, g.max_rotation_deg);
  const double shift = g.max_translation_frac * side;
  params.translation_px.x() = rng.uniform(-shift, shift);
  params.translation_px.y() = rng.uniform(-shift, shift);
  params.zoom = rng.uniform(g.zoom_min, g.zoom_max);
  params.hflip = rng.bernoulli(g.hflip_prob);

  const AppearanceConfig& a = config.appearance;
  params.blur_sigma = rng.uniform(0.0, a.blur_sigma_max);
  for (auto& gain : params.color_gains) gain = rng.uniform(a.gain_min, a.gain_max);
  return params;
}

bool paste_into(Image& image, const SegmentedObject& cutout, const Eigen::Vector2d& center,
                double scale, Image* coverage) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("paste: scale must be positive and finite");
  }
  if (image.channels() != 3) throw std::invalid_argument("paste: target must be RGB");
  const int src_w = cutout.pixels.width();
  const int src_h = cutout.pixels.height();
  const auto dst_w = static_cast<int>(std::lround(src_w * scale));
  const auto dst_h = static_cast<int>(std::lround(src_h * scale));
  if (dst_w <= 0 || dst_h <= 0) return false;

  const auto left = static_cast<int>(std::lround(center.x() - dst_w / 2.0));
  const auto top = static_cast<int>(std::lround(center.y() - dst_h / 2.0));
  const int x_begin = std::max(0, left);
  const int y_begin = std::max(0, top);
  const int x_end = std::min(image.width(), left + dst_w);
  const int y_end = std::min(image.height(), top + dst_h);
  const double sx = static_cast<double>(src_w) / dst_w;
  const double sy = static_cast<double>(src_h) / dst_h;

  for (int y = y_begin; y < y_end; ++y) {
    const double v = (y - top + 0.5) * sy;
    const int ay = std::min(src_h - 1, static_cast<int>(v));
    const double fv = v - 0.5;
    const int y0 = std::clamp(static_cast<int>(std::floor(fv)), 0, src_h - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor(fv)) + 1, 0, src_h - 1);
    const double wy = fv - std::floor(fv);
    for (int x = x_begin; x < x_end; ++x) {
      const double u = (x - left + 0.5) * sx;
      const int ax = std::min(src_w - 1, static_cast<int>(u));
      const int alpha = cutout.alpha.at(ax, ay, 0);
      if (alpha == 0) continue;
      const double fu = u - 0.5;
      const int x0 = std::clamp(static_cast<int>(std::floor(fu)), 0, src_w - 1);
      const int x1 = std::clamp(static_cast<int>(std::floor(fu)) + 1, 0, src_w - 1);
      const double wx = fu - std::floor(fu);
      for (int c = 0; c < 3; ++c) {
        const double top_row = (1 - wx) * cutout.pixels.at(x0, y0, c) + wx * cutout.pixels.at(x1, y0, c);
        const double bottom_row = (1 - wx) * cutout.pixels.at(x0, y1, c) + wx * cutout.pixels.at(x1, y1, c);
        const double color = (1 - wy) * top_row + wy * bottom_row;
        const double blended = alpha == 255 ? color
                                            : (alpha * color + (255 - alpha) * image.at(x, y, c)) / 255.0;
        image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0L, 255L));
      }
      if (coverage) coverage->at(x, y, 0) = 255;
    }
  }
  return true;
}

Image paste(const Image& image, const SegmentedObject& cutout, const Eigen::Vector2d& center,
            double scale, std::string* warning) {
  Image out = image;
  if (!paste_into(out, cutout, center, scale) && warning) {
    *warning = "cutout " + cutout.id() + " scaled by " + std::to_string(scale) +
               " has no pixels; paste skipped";
  }
  return out;
}

OcclusionResult occlude_frame(const Image& image, const OccluderLibrary& library,
                              const AugParams& params, const std::string& frame_id) {
  OcclusionResult result;
  result.image = image;
  result.record.frame_id = frame_id;
  result.record.params = params;
  if (!params.occlude) return result;
  if (params.positions.size() != params.occluder_ids.size() ||
      params.scales.size() != params.occluder_ids.size()) {
    throw std::invalid_argument("occlude_frame: occluder lists differ in length");
  }
  Image coverage(image.width(), image.height(), 1);
  const double side = std::max(image.width(), image.height());
  for (std::size_t i = 0; i < params.occluder_ids.size(); ++i) {
    const int id = params.occluder_ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= library.size()) {
      throw std::out_of_range("occlude_frame: occluder id " + std::to_string(id) +
                              " outside library of " + std::to_string(library.size()));
    }
    const SegmentedObject& cutout = library.objects[static_cast<std::size_t>(id)];
    const double longest = std::max(cutout.pixels.width(), cutout.pixels.height());
    const double factor = params.scales[i] * side / longest;
    if (!paste_into(result.image, cutout, params.positions[i], factor, &coverage)) {
      result.warnings.push_back(frame_id + ": occluder " + cutout.id() + " scaled to zero pixels");
    }
  }
  const auto covered = std::count(coverage.data().begin(), coverage.data().end(), 255);
  result.record.covered_fraction =
      static_cast<double>(covered) / static_cast<double>(coverage.pixel_count());
  return result;
}

Eigen::Matrix3d augmentation_similarity(const AugParams& params, int crop_width, int crop_height) {
  if (!(params.zoom > 0.0) || !std::isfinite(params.zoom) || !std::isfinite(params.rotation_deg) ||
      !params.translation_px.allFinite()) {
    throw std::invalid_argument("geometric parameters must be finite with zoom > 0");
  }
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double flip = params.hflip ? -1.0 : 1.0;
  Eigen::Matrix2d linear;
  linear << params.zoom * cos_t * flip, -params.zoom * sin_t,  //
      params.zoom * sin_t * flip, params.zoom * cos_t;
  const Eigen::Vector2d center(crop_width / 2.0, crop_height / 2.0);
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
  a.topLeftCorner<2, 2>() = linear;
  a.topRightCorner<2, 1>() = center - linear * center + params.translation_px;
  return a;
}

GeometricResult geometric_augment(const Image& image, const std::optional<Pose3D>& pose,
                                  const AugParams& params, const CropTransform& crop,
                                  const JointFlipMap* flip_map) {
  const Eigen::Matrix3d similarity = augmentation_similarity(params, crop.out_width, crop.out_height);
  GeometricResult result;
  result.crop = crop;
  result.crop.homography = similarity * crop.homography;
  result.crop.s = crop.s * params.zoom;
  result.image = warp_image(image, result.crop);

  if (pose) {
    Pose3D out = *pose;
    const double theta = params.rotation_deg * std::numbers::pi / 180.0;
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
    if (params.hflip) {
      if (!flip_map) throw std::invalid_argument("geometric_augment: hflip of a pose needs a flip map");
      out = flip_pose(out, *flip_map);
    }
    if (params.rotation_deg != 0.0) {
      for (auto& joint : out.joints) joint = rot * joint;
    }
    result.pose = std::move(out);
  }
  return result;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (auto& w : kernel) w /= total;
  return kernel;
}

}  // namespace

Image appearance_augment(const Image& image, const AugParams& params) {
  if (!(params.blur_sigma >= 0.0)) throw std::invalid_argument("blur_sigma must be >= 0");
  for (double g : params.color_gains) {
    if (!(g > 0.0)) throw std::invalid_argument("color gains must be positive");
  }
  const int w = image.width();
  const int h = image.height();
  const int channels = image.channels();
  std::vector<double> values(image.data().begin(), image.data().end());

  if (params.blur_sigma > 0.0) {
    const std::vector<double> kernel = gaussian_kernel(params.blur_sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(values.size());
    auto idx = [&](int x, int y, int c) {
      return (static_cast<std::size_t>(y) * w + x) * channels + c;
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < channels; ++c) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            acc += kernel[static_cast<std::size_t>(k + radius)] * values[idx(std::clamp(x + k, 0, w - 1), y, c)];
          }
          tmp[idx(x, y, c)] = acc;
        }
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < channels; ++c) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[idx(x, std::clamp(y + k, 0, h - 1), c)];
          }
          values[idx(x, y, c)] = acc;
        }
      }
    }
  }

  Image out(w, h, channels);
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto c = static_cast<int>(i % static_cast<std::size_t>(channels));
    const double gain = c < 3 ? params.color_gains[static_cast<std::size_t>(c)] : 1.0;
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(values[i] * gain), 0L, 255L));
  }
  return out;
}

nlohmann::json to_json(const AugParams& params) {
  nlohmann::json positions = nlohmann::json::array();
  for (const auto& p : params.positions) positions.push_back({p.x(), p.y()});
  return {{"occlude", params.occlude},
          {"occluder_ids", params.occluder_ids},
          {"positions", positions},
          {"scales", params.scales},
          {"rotation_deg", params.rotation_deg},
          {"translation_px", {params.translation_px.x(), params.translation_px.y()}},
          {"zoom", params.zoom},
          {"hflip", params.hflip},
          {"blur_sigma", params.blur_sigma},
          {"color_gains", params.color_gains}};
}

nlohmann::json to_json(const OcclusionRecord& record) {
  return {{"frame_id", record.frame_id},
          {"params", to_json(record.params)},
          {"covered_fraction", record.covered_fraction}};
}

}  // namespace synocc
