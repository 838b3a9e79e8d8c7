#pragma once

#include <Eigen/Core>

#include <array>
#include <concepts>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synocc {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raw network head outputs. `spatial_logits` is Hh x Wh x C in row-major HWC order with
/// C = J * D; `depth_logits` is the 1D absolute-depth head.
struct BackboneOutput {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> spatial_logits;
  std::vector<double> depth_logits;

  std::size_t spatial_index(int v, int u, int k) const {
    return (static_cast<std::size_t>(v) * width + u) * channels + k;
  }
  void validate() const;
};

struct GridSpec {
  int crop_width = 256;
  int crop_height = 256;
  int heatmap_width = 16;
  int heatmap_height = 16;
  int depth_bins = 16;
  double rel_depth_half_range_mm = 1000.0;
  int abs_depth_bins = 32;
  double abs_depth_range_mm = 10000.0;
};

/// Cell-center coordinates of every heatmap axis.
struct CoordinateGrid {
  std::vector<double> x;      // crop pixels, Wh entries
  std::vector<double> y;      // crop pixels, Hh entries
  std::vector<double> z;      // relative depth in mm, D entries
  std::vector<double> zstar;  // absolute depth in mm, Dz entries

  static CoordinateGrid make(const GridSpec& spec);

  int width() const { return static_cast<int>(x.size()); }
  int height() const { return static_cast<int>(y.size()); }
  int depth() const { return static_cast<int>(z.size()); }
};

/// J logit volumes, each D x Hh x Wh stored as index (d * Hh + v) * Wh + u.
struct VolumetricHeatmapSet {
  int joints = 0;
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<std::vector<double>> volumes;

  std::size_t volume_size() const {
    return static_cast<std::size_t>(depth) * height * width;
  }
};

struct DecodedPose {
  std::vector<Eigen::Vector2d> xy;
  std::vector<double> dz;
  double zstar = 0.0;
};

/// Channel k goes to joint k / D, depth slice k % D. Pure reindexing.
VolumetricHeatmapSet reshape_channels(const BackboneOutput& output, int joints, int depth);

/// Joint softmax over every entry, with max subtraction.
template <std::floating_point T>
std::vector<T> softmax_volume(std::span<const T> logits);

/// Expected (x, y, dZ) under the softmax of one D x Hh x Wh volume.
template <std::floating_point T>
std::array<T, 3> soft_argmax3(std::span<const T> logits, const CoordinateGrid& grid);

/// Expected coordinate under the softmax of a 1D logit vector.
template <std::floating_point T>
T soft_argmax1(std::span<const T> logits, std::span<const double> coords);

/// d(x, y, dZ) / d(logit_k) = p_k * (g_k - mu) for each output row.
struct SoftArgmax3Jacobian {
  std::array<std::vector<double>, 3> rows;
};

SoftArgmax3Jacobian soft_argmax3_grad(std::span<const double> logits, const CoordinateGrid& grid);
std::vector<double> soft_argmax1_grad(std::span<const double> logits,
                                      std::span<const double> coords);

/// Reshape, per-joint soft_argmax3, then the absolute-depth soft_argmax1.
DecodedPose decode(const BackboneOutput& output, int joints, int depth, const CoordinateGrid& grid);

enum class TensorDType { kFloat32, kFloat64 };

/// Backbone outputs on disk: one JSON header line
/// `{"dims":[Hh,Wh,C],"depth_dims":[Dz],"dtype":"float32","layout":"HWC"}` followed by the
/// little-endian spatial values and then the depth values.
BackboneOutput read_backbone_output(const std::filesystem::path& path);
void write_backbone_output(const std::filesystem::path& path, const BackboneOutput& output,
                           TensorDType dtype = TensorDType::kFloat32);

}  // namespace synocc
