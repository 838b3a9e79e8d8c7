#include "synocc/training.hpp"

#include "synocc/metrics.hpp"
#include "synocc/parallel.hpp"
#include "synocc/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace synocc {

LossSpace parse_loss_space(const std::string& name) {
  if (name == "root_relative") return LossSpace::kRootRelative;
  if (name == "absolute") return LossSpace::kAbsolute;
  throw std::invalid_argument("unknown loss space '" + name + "' (expected root_relative|absolute)");
}

std::string to_string(LossSpace space) {
  return space == LossSpace::kRootRelative ? "root_relative" : "absolute";
}

namespace {

inline double sign(double v) { return (v > 0) - (v < 0); }

}  // namespace

LossReport l1_loss(const Pose3D& pred, const Pose3D& gt, LossSpace space) {
  require_compatible(pred, gt, "l1_loss");
  pred.validate();
  gt.validate();
  const int joints = pred.size();
  const double norm = 1.0 / (3.0 * joints);
  const Vec3 pred_root = space == LossSpace::kRootRelative ? pred.root() : Vec3::Zero();
  const Vec3 gt_root = space == LossSpace::kRootRelative ? gt.root() : Vec3::Zero();

  LossReport report;
  report.grad_wrt_pred.assign(static_cast<std::size_t>(joints), Vec3::Zero());
  Vec3 sign_sum = Vec3::Zero();
  double total = 0.0;
  for (int j = 0; j < joints; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const Vec3 diff = (pred.joints[idx] - pred_root) - (gt.joints[idx] - gt_root);
    total += diff.cwiseAbs().sum();
    const Vec3 s = diff.unaryExpr([](double v) { return sign(v); });
    report.grad_wrt_pred[idx] = s * norm;
    sign_sum += s;
  }
  if (space == LossSpace::kRootRelative) {
    report.grad_wrt_pred[static_cast<std::size_t>(pred.root_index)] -= sign_sum * norm;
  }
  report.value = total * norm;
  return report;
}

Pose3D predict_pose(const BackboneOutput& output, double c, const FrameGeometry& geometry,
                    const CoordinateGrid& grid, const HeadShape& shape, int root_index) {
  const DecodedPose decoded = decode(output, shape.joints, shape.depth, grid);
  const CropCamera cam = geometry.camera(c);
  Pose3D pose;
  pose.root_index = root_index;
  pose.joints.reserve(decoded.xy.size());
  for (std::size_t j = 0; j < decoded.xy.size(); ++j) {
    pose.joints.push_back(
        back_project(decoded.xy[j].x(), decoded.xy[j].y(), decoded.dz[j], decoded.zstar, cam));
  }
  return pose;
}

BackwardResult full_backward(const BackboneOutput& output, double c, const Pose3D& gt,
                             const FrameGeometry& geometry, const CoordinateGrid& grid,
                             const HeadShape& shape, LossSpace space) {
  output.validate();
  const VolumetricHeatmapSet volumes = reshape_channels(output, shape.joints, shape.depth);
  if (volumes.height != grid.height() || volumes.width != grid.width() ||
      shape.depth != grid.depth()) {
    throw ShapeError("full_backward: backbone output shape does not match the coordinate grid");
  }
  if (gt.size() != shape.joints) throw ShapeError("full_backward: ground truth joint count mismatch");

  const CropCamera cam = geometry.camera(c);
  const double zstar = soft_argmax1<double>(output.depth_logits, grid.zstar);

  BackwardResult result;
  result.pred.root_index = gt.root_index;
  std::vector<std::array<double, 3>> decoded(static_cast<std::size_t>(shape.joints));
  for (int j = 0; j < shape.joints; ++j) {
    const auto& vol = volumes.volumes[static_cast<std::size_t>(j)];
    decoded[static_cast<std::size_t>(j)] = soft_argmax3<double>(vol, grid);
    const auto& d = decoded[static_cast<std::size_t>(j)];
    result.pred.joints.push_back(back_project(d[0], d[1], d[2], zstar, cam));
  }

  const LossReport loss = l1_loss(result.pred, gt, space);
  result.loss = loss.value;
  result.grad_spatial.assign(output.spatial_logits.size(), 0.0);

  double grad_zstar = 0.0;
  const std::size_t vol_size = volumes.volume_size();
  for (int j = 0; j < shape.joints; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    const Vec3& upstream = loss.grad_wrt_pred[idx];
    const auto& d = decoded[idx];
    const BackProjectJacobian jac = back_project_grad(d[0], d[1], d[2], zstar, cam);
    const Eigen::Matrix<double, 1, 5> through = upstream.transpose() * jac;
    grad_zstar += through(kGradZstar);
    result.grad_c += through(kGradC);

    const double gx = through(kGradX);
    const double gy = through(kGradY);
    const double gdz = through(kGradDz);
    if (gx == 0.0 && gy == 0.0 && gdz == 0.0) continue;
    const SoftArgmax3Jacobian sa = soft_argmax3_grad(volumes.volumes[idx], grid);
    for (std::size_t k = 0; k < vol_size; ++k) {
      const int u = static_cast<int>(k % static_cast<std::size_t>(volumes.width));
      const int v = static_cast<int>((k / static_cast<std::size_t>(volumes.width)) %
                                     static_cast<std::size_t>(volumes.height));
      const int dd = static_cast<int>(k / (static_cast<std::size_t>(volumes.width) * volumes.height));
      result.grad_spatial[output.spatial_index(v, u, j * shape.depth + dd)] =
          gx * sa.rows[0][k] + gy * sa.rows[1][k] + gdz * sa.rows[2][k];
    }
  }

  result.grad_depth = soft_argmax1_grad(output.depth_logits, grid.zstar);
  for (auto& g : result.grad_depth) g *= grad_zstar;
  return result;
}

void LrSchedule::validate() const {
  if (!(base_lr > 0) || !(max_lr > 0)) throw std::invalid_argument("LrSchedule: rates must be positive");
  if (base_lr > max_lr) throw std::invalid_argument("LrSchedule: base_lr exceeds max_lr");
  if (period <= 0) throw std::invalid_argument("LrSchedule: period must be positive");
}

double triangular_lr(std::int64_t step, const LrSchedule& schedule) {
  schedule.validate();
  if (step < 0) throw std::invalid_argument("triangular_lr: negative step");
  const double half = schedule.period / 2.0;
  const double phase = static_cast<double>(step % schedule.period);
  const double rise = 1.0 - std::abs(phase / half - 1.0);
  return schedule.base_lr + (schedule.max_lr - schedule.base_lr) * std::max(0.0, rise);
}

std::vector<std::int64_t> snapshot_steps(std::int64_t total_steps, const LrSchedule& schedule,
                                         int n_last) {
  schedule.validate();
  if (n_last < 1) throw std::invalid_argument("snapshot_steps: n_last must be at least 1");
  const std::int64_t cycles = total_steps / schedule.period;
  if (cycles < n_last) {
    throw std::invalid_argument("snapshot_steps: " + std::to_string(total_steps) +
                                " steps complete only " + std::to_string(cycles) +
                                " cycles, need " + std::to_string(n_last));
  }
  std::vector<std::int64_t> steps;
  for (std::int64_t k = cycles - n_last + 1; k <= cycles; ++k) steps.push_back(k * schedule.period);
  return steps;
}

namespace {

// Rough 17-joint skeleton in mm, pelvis at the origin, Y pointing down.
const std::vector<Vec3>& skeleton17() {
  static const std::vector<Vec3> joints = {
      {0, 0, 0},        {-130, 0, 0},     {-130, 430, 20},  {-130, 850, 0},
      {130, 0, 0},      {130, 430, 20},   {130, 850, 0},    {0, -230, 0},
      {0, -480, 0},     {0, -580, 10},    {0, -700, 0},     {170, -480, 0},
      {200, -230, 80},  {220, -20, 160},  {-170, -480, 0},  {-200, -230, 80},
      {-220, -20, 160},
  };
  return joints;
}

}  // namespace

std::vector<double> evidence_logits(double coord, const std::vector<double>& axis, bool visible) {
  std::vector<double> logits(axis.size(), 0.0);
  if (!visible || axis.size() < 2) return logits;
  const double clamped = std::clamp(coord, axis.front(), axis.back());
  auto upper = std::upper_bound(axis.begin(), axis.end(), clamped);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(upper - axis.begin()), axis.size() - 1);
  hi = std::max<std::size_t>(hi, 1);
  const std::size_t lo = hi - 1;
  const double w = (axis[hi] - clamped) / (axis[hi] - axis[lo]);
  constexpr double kFloor = -1000.0;
  constexpr double kTiny = 1e-200;
  std::fill(logits.begin(), logits.end(), kFloor);
  logits[lo] = std::log(std::max(w, kTiny));
  logits[hi] = std::log(std::max(1.0 - w, kTiny));
  return logits;
}

std::vector<ToySample> make_synthetic_samples(const SyntheticSetOptions& options) {
  if (options.samples < 1 || options.joints < 1) {
    throw std::invalid_argument("make_synthetic_samples: need at least one sample and joint");
  }
  const CoordinateGrid grid = CoordinateGrid::make(options.grid);
  std::vector<ToySample> samples;
  for (int i = 0; i < options.samples; ++i) {
    ToySample sample;
    sample.id = "toy_" + std::to_string(i);
    Rng rng = Rng::for_frame(options.seed, sample.id);

    std::vector<Vec3> body;
    if (options.joints == static_cast<int>(skeleton17().size())) {
      body = skeleton17();
    } else {
      body.emplace_back(Vec3::Zero());
      for (int j = 1; j < options.joints; ++j) {
        body.emplace_back(rng.uniform(-300, 300), rng.uniform(-700, 850), rng.uniform(-200, 200));
      }
    }
    const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
    const Vec3 placement(0.0, 0.0, rng.uniform(3500.0, 6000.0));
    for (std::size_t j = 0; j < body.size(); ++j) {
      Vec3 jitter(rng.normal(), rng.normal(), rng.normal());
      if (j == 0) jitter.setZero();
      body[j] = rot * (body[j] + 30.0 * jitter) + placement;
    }

    // Center the person's projection on the optical axis, then pick the crop scale.
    const double true_focal = options.focal * options.c_true;
    Vec3 shift = Vec3::Zero();
    Eigen::Vector2d lo, hi;
    for (int iter = 0; iter < 4; ++iter) {
      lo.setConstant(std::numeric_limits<double>::infinity());
      hi.setConstant(-std::numeric_limits<double>::infinity());
      for (const auto& p : body) {
        const Eigen::Vector2d q = true_focal * (p + shift).head<2>() / p.z();
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
      }
      const Eigen::Vector2d center = 0.5 * (lo + hi);
      shift.head<2>() -= center * placement.z() / true_focal;
    }
    for (auto& p : body) p += shift;
    const double side = (hi - lo).maxCoeff();

    sample.geometry.focal = options.focal;
    sample.geometry.scale = options.fill * options.grid.crop_width / side;
    sample.geometry.crop_width = options.grid.crop_width;
    sample.geometry.crop_height = options.grid.crop_height;
    sample.target.joints = body;
    sample.target.root_index = 0;

    const double crop_focal = options.focal * sample.geometry.scale * options.c_true;
    for (const auto& p : body) {
      Eigen::Vector2d q = project(p, crop_focal, options.grid.crop_width, options.grid.crop_height);
      q.x() = std::clamp(q.x(), grid.x.front(), grid.x.back());
      q.y() = std::clamp(q.y(), grid.y.front(), grid.y.back());
      sample.image_xy.push_back(q);
    }
    sample.visible.assign(body.size(), true);
    samples.push_back(std::move(sample));
  }
  return samples;
}

namespace {

struct SampleState {
  std::vector<std::vector<double>> evidence_x;  // [joint][u]
  std::vector<std::vector<double>> evidence_y;  // [joint][v]
  std::vector<double> depth_axis;               // [joint * D + d], learnable
  std::vector<double> depth_head;               // [Dz], learnable
};

BackboneOutput assemble(const SampleState& state, const HeadShape& shape, const GridSpec& spec) {
  BackboneOutput out;
  out.height = spec.heatmap_height;
  out.width = spec.heatmap_width;
  out.channels = shape.joints * shape.depth;
  out.spatial_logits.resize(static_cast<std::size_t>(out.height) * out.width * out.channels);
  for (int v = 0; v < out.height; ++v) {
    for (int u = 0; u < out.width; ++u) {
      for (int j = 0; j < shape.joints; ++j) {
        const double image_part = state.evidence_x[static_cast<std::size_t>(j)][static_cast<std::size_t>(u)] +
                                  state.evidence_y[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)];
        for (int d = 0; d < shape.depth; ++d) {
          const int k = j * shape.depth + d;
          out.spatial_logits[out.spatial_index(v, u, k)] =
              image_part + state.depth_axis[static_cast<std::size_t>(k)];
        }
      }
    }
  }
  out.depth_logits = state.depth_head;
  return out;
}

}  // namespace

TrainReport toy_train(const ToyTrainConfig& config, const std::vector<ToySample>& samples) {
  if (config.steps < 1) throw std::invalid_argument("toy_train: steps must be at least 1");
  if (samples.empty()) throw std::invalid_argument("toy_train: no samples");
  config.schedule.validate();
  const CoordinateGrid grid = CoordinateGrid::make(config.grid);
  const HeadShape shape{config.joints, config.grid.depth_bins};

  std::vector<SampleState> states(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ToySample& sample = samples[i];
    if (sample.target.size() != config.joints || sample.image_xy.size() != sample.target.joints.size() ||
        sample.visible.size() != sample.target.joints.size()) {
      throw std::invalid_argument("toy_train: sample " + sample.id + " has inconsistent joint count");
    }
    SampleState& st = states[i];
    Rng rng = Rng::for_frame(config.seed, sample.id);
    for (int j = 0; j < config.joints; ++j) {
      const auto& xy = sample.image_xy[static_cast<std::size_t>(j)];
      const bool vis = sample.visible[static_cast<std::size_t>(j)];
      st.evidence_x.push_back(evidence_logits(xy.x(), grid.x, vis));
      st.evidence_y.push_back(evidence_logits(xy.y(), grid.y, vis));
    }
    st.depth_axis.resize(static_cast<std::size_t>(config.joints * shape.depth));
    for (auto& v : st.depth_axis) v = 0.01 * rng.normal();
    st.depth_head.resize(grid.zstar.size());
    for (auto& v : st.depth_head) v = 0.01 * rng.normal();
  }

  std::set<std::int64_t> snapshot_set;
  {
    const int available =
        std::min<int>(config.snapshots, static_cast<int>(config.steps / config.schedule.period));
    std::vector<std::int64_t> steps =
        available > 0 ? snapshot_steps(config.steps, config.schedule, available)
                      : std::vector<std::int64_t>{config.steps};
    snapshot_set.insert(steps.begin(), steps.end());
  }

  TrainReport report;
  report.snapshot_steps.assign(snapshot_set.begin(), snapshot_set.end());
  double c = config.c_init;
  std::vector<BackwardResult> results(samples.size());

  auto evaluate = [&](bool need_grad) {
    parallel_for(samples.size(), config.threads, [&](std::size_t i) {
      const BackboneOutput logits = assemble(states[i], shape, config.grid);
      if (need_grad) {
        results[i] = full_backward(logits, c, samples[i].target, samples[i].geometry, grid, shape,
                                   config.loss_space);
      } else {
        results[i].pred = predict_pose(logits, c, samples[i].geometry, grid, shape,
                                       samples[i].target.root_index);
        results[i].loss = l1_loss(results[i].pred, samples[i].target, config.loss_space).value;
      }
    });
    double total = 0.0;
    for (const auto& r : results) total += r.loss;
    return total / static_cast<double>(samples.size());
  };

  for (int step = 0; step < config.steps; ++step) {
    double loss = 0.0;
    try {
      loss = evaluate(true);
    } catch (const GeometryError& e) {
      // Runaway logits can push a joint behind the camera before the loss turns non-finite.
      throw DivergenceError(std::string("toy_train: ") + e.what() + " at step " + std::to_string(step), step);
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("toy_train: loss became non-finite at step " + std::to_string(step), step);
    }
    report.loss_curve.push_back(loss);
    const double lr = triangular_lr(step, config.schedule);

    double grad_c = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const BackwardResult& r = results[i];
      SampleState& st = states[i];
      // The image-plane evidence is fixed; only the depth-axis component of each volume
      // learns, so its gradient is the volume gradient summed over (v, u).
      std::vector<double> grad_axis(st.depth_axis.size(), 0.0);
      for (std::size_t p = 0; p < r.grad_spatial.size(); ++p) {
        grad_axis[p % grad_axis.size()] += r.grad_spatial[p];
      }
      for (std::size_t k = 0; k < grad_axis.size(); ++k) {
        st.depth_axis[k] -= lr * config.depth_axis_lr_scale * grad_axis[k];
      }
      for (std::size_t k = 0; k < st.depth_head.size(); ++k) {
        st.depth_head[k] -= lr * config.depth_head_lr_scale * r.grad_depth[k];
      }
      grad_c += r.grad_c;
    }
    if (config.learn_c) {
      grad_c /= static_cast<double>(samples.size());
      c = std::max(1e-3, c - lr * config.c_lr_scale * grad_c);
    }

    if (snapshot_set.contains(step + 1)) {
      evaluate(false);
      std::vector<Pose3D> preds;
      for (const auto& r : results) preds.push_back(r.pred);
      report.snapshot_predictions.push_back(std::move(preds));
    }
  }

  report.final_loss = evaluate(false);
  if (!std::isfinite(report.final_loss)) {
    throw DivergenceError("toy_train: final loss is non-finite", config.steps);
  }
  report.initial_loss = report.loss_curve.front();
  report.final_c = c;

  double ensemble_total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<Pose3D> per_snapshot;
    for (const auto& snap : report.snapshot_predictions) per_snapshot.push_back(snap[i]);
    report.ensemble_predictions.push_back(ensemble_average(per_snapshot));
    ensemble_total += l1_loss(report.ensemble_predictions.back(), samples[i].target, config.loss_space).value;
  }
  report.ensemble_loss = ensemble_total / static_cast<double>(samples.size());
  return report;
}

}  // namespace synocc
