#pragma once

#include "synocc/camera.hpp"
#include "synocc/heatmap.hpp"
#include "synocc/pose.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace synocc {

enum class LossSpace { kRootRelative, kAbsolute };

LossSpace parse_loss_space(const std::string& name);
std::string to_string(LossSpace space);

struct LossReport {
  double value = 0.0;               // mean absolute error per coordinate, mm
  std::vector<Vec3> grad_wrt_pred;  // d value / d pred, one row per joint
};

/// Mean over all 3J coordinates of |pred - gt|, optionally after root-relativizing both.
/// The subgradient uses sign(0) = 0 and routes through the root subtraction.
LossReport l1_loss(const Pose3D& pred, const Pose3D& gt, LossSpace space);

/// Per-frame preprocessing values entering back-projection; c is passed separately.
struct FrameGeometry {
  double focal = 1500.0;
  double scale = 1.0;
  double crop_width = 256.0;
  double crop_height = 256.0;

  CropCamera camera(double c) const { return {focal, scale, c, crop_width, crop_height}; }
};

struct HeadShape {
  int joints = 17;
  int depth = 16;
};

/// Decode and back-project every joint to camera space (mm).
Pose3D predict_pose(const BackboneOutput& output, double c, const FrameGeometry& geometry,
                    const CoordinateGrid& grid, const HeadShape& shape, int root_index);

struct BackwardResult {
  double loss = 0.0;
  Pose3D pred;
  std::vector<double> grad_spatial;  // same HWC layout as BackboneOutput::spatial_logits
  std::vector<double> grad_depth;
  double grad_c = 0.0;
};

/// Loss and its gradient w.r.t. every logit and c, chained through l1_loss,
/// back_project_grad and the soft-argmax Jacobians.
BackwardResult full_backward(const BackboneOutput& output, double c, const Pose3D& gt,
                             const FrameGeometry& geometry, const CoordinateGrid& grid,
                             const HeadShape& shape, LossSpace space);

struct LrSchedule {
  double base_lr = 1e-3;
  double max_lr = 1e-2;
  int period = 100;

  void validate() const;
};

/// Symmetric triangle: base -> max over period/2 steps, back to base at period.
double triangular_lr(std::int64_t step, const LrSchedule& schedule);

/// The last `n_last` cycle boundaries (multiples of the period) not after total_steps.
std::vector<std::int64_t> snapshot_steps(std::int64_t total_steps, const LrSchedule& schedule,
                                         int n_last = 3);

/// A synthetic training frame. The 2D joint locations stand in for what the network sees in
/// the image; a joint marked invisible contributes no image evidence.
struct ToySample {
  std::string id;
  Pose3D target;
  FrameGeometry geometry;
  std::vector<Eigen::Vector2d> image_xy;
  std::vector<bool> visible;
};

struct SyntheticSetOptions {
  int samples = 4;
  int joints = 17;
  double focal = 1500.0;
  double c_true = 1.0;
  double fill = 0.75;
  GridSpec grid;
  std::uint64_t seed = 0;
};

/// Random skeletons 3.5-6 m in front of the camera, projected with f*s*c_true.
std::vector<ToySample> make_synthetic_samples(const SyntheticSetOptions& options);

struct ToyTrainConfig {
  int steps = 500;
  LrSchedule schedule{0.5, 5.0, 100};
  std::uint64_t seed = 0;
  int joints = 17;
  GridSpec grid;
  bool learn_c = false;
  double c_init = 1.0;
  // Gradient magnitudes differ by orders between parameter groups; plain GD scales the
  // shared learning rate per group.
  double depth_axis_lr_scale = 0.1;
  double depth_head_lr_scale = 0.02;
  double c_lr_scale = 1e-6;
  LossSpace loss_space = LossSpace::kRootRelative;
  int snapshots = 3;
  int threads = 1;
};

struct TrainReport {
  std::vector<double> loss_curve;  // loss before each update
  double initial_loss = 0.0;
  double final_loss = 0.0;  // after the last update
  double final_c = 1.0;
  std::vector<std::int64_t> snapshot_steps;
  std::vector<std::vector<Pose3D>> snapshot_predictions;  // [snapshot][sample]
  std::vector<Pose3D> ensemble_predictions;               // mean over snapshots
  double ensemble_loss = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Gradient descent on per-sample free depth logits plus a global c. The image-plane part
/// of each joint volume is fixed by the sample's 2D evidence, so c is identifiable.
TrainReport toy_train(const ToyTrainConfig& config, const std::vector<ToySample>& samples);

/// Image-evidence logits for one axis: the softmax expectation equals `coord` exactly
/// (two adjacent cells carry all mass). Returns zeros when `visible` is false.
std::vector<double> evidence_logits(double coord, const std::vector<double>& axis, bool visible);

}  // namespace synocc
