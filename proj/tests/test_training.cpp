#include "fixtures.hpp"
#include "synocc/metrics.hpp"
#include "synocc/rng.hpp"
#include "synocc/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace synocc {
namespace {

Pose3D pose(std::vector<Vec3> joints, int root = 0) { return {std::move(joints), root}; }

TEST(L1Loss, ZeroAtCoincidence) {
  const Pose3D p = testing::random_pose(17, 1);
  for (auto space : {LossSpace::kRootRelative, LossSpace::kAbsolute}) {
    const auto r = l1_loss(p, p, space);
    EXPECT_EQ(r.value, 0.0);
    for (const auto& g : r.grad_wrt_pred) EXPECT_EQ(g, Vec3::Zero());
  }
}

TEST(L1Loss, HandDerivedSingleJointOffset) {
  const Pose3D gt = pose({{0, 0, 4000}, {100, 200, 4100}});
  const Pose3D pred = pose({{0, 0, 4000}, {103, 196, 4100}});
  const auto r = l1_loss(pred, gt, LossSpace::kRootRelative);
  EXPECT_DOUBLE_EQ(r.value, 7.0 / 6.0);
  // sign(0) = 0 for the untouched Z coordinate; the root column takes minus the sum.
  EXPECT_EQ(r.grad_wrt_pred[1], Vec3(1.0 / 6, -1.0 / 6, 0));
  EXPECT_EQ(r.grad_wrt_pred[0], Vec3(-1.0 / 6, 1.0 / 6, 0));
}

TEST(L1Loss, AbsoluteUniformTranslation) {
  const Pose3D gt = testing::random_pose(17, 2);
  const auto r = l1_loss(translated(gt, {1, 1, 1}), gt, LossSpace::kAbsolute);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_EQ(l1_loss(translated(gt, {1, 1, 1}), gt, LossSpace::kRootRelative).value, 0.0);
}

TEST(L1Loss, GradientEntriesBounded) {
  const Pose3D a = testing::random_pose(17, 3), b = testing::random_pose(17, 4);
  const auto r = l1_loss(a, b, LossSpace::kAbsolute);
  for (const auto& g : r.grad_wrt_pred) EXPECT_LE(g.cwiseAbs().maxCoeff(), 1.0 / 51 + 1e-15);
}

TEST(L1Loss, PermutationSymmetric) {
  const Pose3D a = testing::random_pose(6, 5), b = testing::random_pose(6, 6);
  const std::vector<int> perm{0, 3, 5, 1, 2, 4};
  Pose3D pa = a, pb = b;
  for (int j = 0; j < 6; ++j) {
    pa.joints[j] = a.joints[perm[j]];
    pb.joints[j] = b.joints[perm[j]];
  }
  EXPECT_NEAR(l1_loss(a, b, LossSpace::kRootRelative).value, l1_loss(pa, pb, LossSpace::kRootRelative).value, 1e-12);
}

TEST(L1Loss, RootRelativeTranslationInvariantExactly) {
  // Power-of-two offsets keep every subtraction exact.
  const Pose3D a = testing::random_pose(17, 7), b = testing::random_pose(17, 8);
  const double base = l1_loss(a, b, LossSpace::kRootRelative).value;
  EXPECT_EQ(base, l1_loss(translated(a, {256, -512, 1024}), translated(b, {-64, 128, 32}), LossSpace::kRootRelative).value);
}

TEST(L1Loss, RejectsMismatchedPoses) {
  EXPECT_THROW(l1_loss(testing::random_pose(17, 1), testing::random_pose(16, 1), LossSpace::kAbsolute),
               std::invalid_argument);
}

TEST(LrSchedule, TriangleShape) {
  const LrSchedule s{0.1, 1.1, 100};
  EXPECT_DOUBLE_EQ(triangular_lr(0, s), 0.1);
  EXPECT_DOUBLE_EQ(triangular_lr(50, s), 1.1);
  EXPECT_DOUBLE_EQ(triangular_lr(100, s), 0.1);
  EXPECT_DOUBLE_EQ(triangular_lr(25, s), 0.6);
  EXPECT_DOUBLE_EQ(triangular_lr(75, s), 0.6);
  for (int t = 0; t < 1000; ++t) {
    const double lr = triangular_lr(t, s);
    EXPECT_GE(lr, 0.1);
    EXPECT_LE(lr, 1.1);
    EXPECT_EQ(lr, triangular_lr(t + 100, s));
  }
  EXPECT_THROW((LrSchedule{2, 1, 10}).validate(), std::invalid_argument);
}

TEST(LrSchedule, SnapshotSteps) {
  const LrSchedule s{1e-3, 1e-2, 1000};
  EXPECT_EQ(snapshot_steps(3000, s), (std::vector<std::int64_t>{1000, 2000, 3000}));
  EXPECT_THROW(snapshot_steps(2500, s), std::invalid_argument);
  EXPECT_EQ(snapshot_steps(2500, s, 1), (std::vector<std::int64_t>{2000}));
  for (auto step : snapshot_steps(3000, s)) EXPECT_EQ(triangular_lr(step, s), s.base_lr);
}

TEST(EvidenceLogits, ExpectationEqualsCoordinate) {
  const auto grid = CoordinateGrid::make(GridSpec{});
  for (double x : {8.0, 8.5, 100.25, 131.7, 247.999, 248.0}) {
    const auto logits = evidence_logits(x, grid.x, true);
    EXPECT_NEAR(soft_argmax1<double>(logits, grid.x), x, 1e-9) << x;
  }
  const auto hidden = evidence_logits(50.0, grid.x, false);
  EXPECT_TRUE(std::all_of(hidden.begin(), hidden.end(), [](double v) { return v == 0.0; }));
}

BackboneOutput random_output(const GridSpec& spec, int joints, std::uint64_t seed) {
  Rng rng = Rng::for_frame(seed, "out");
  BackboneOutput out;
  out.height = spec.heatmap_height;
  out.width = spec.heatmap_width;
  out.channels = joints * spec.depth_bins;
  out.spatial_logits.resize(static_cast<std::size_t>(out.height * out.width * out.channels));
  for (auto& v : out.spatial_logits) v = rng.normal();
  out.depth_logits.resize(static_cast<std::size_t>(spec.abs_depth_bins));
  for (auto& v : out.depth_logits) v = rng.normal();
  return out;
}

TEST(FullBackward, ZeroAtExactPrediction) {
  GridSpec spec;
  spec.heatmap_width = spec.heatmap_height = 6;
  spec.depth_bins = 4;
  const auto grid = CoordinateGrid::make(spec);
  const auto out = random_output(spec, 3, 1);
  const FrameGeometry geo{1500, 0.5, 256, 256};
  const Pose3D gt = predict_pose(out, 1.0, geo, grid, {3, 4}, 0);
  const auto r = full_backward(out, 1.0, gt, geo, grid, {3, 4}, LossSpace::kAbsolute);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad_c, 0.0);
  for (double g : r.grad_spatial) EXPECT_EQ(g, 0.0);
  for (double g : r.grad_depth) EXPECT_EQ(g, 0.0);
}

TEST(FullBackward, DepthHeadGradientNonzeroWithDepthError) {
  GridSpec spec;
  spec.heatmap_width = spec.heatmap_height = 6;
  spec.depth_bins = 4;
  const auto grid = CoordinateGrid::make(spec);
  const auto out = random_output(spec, 3, 2);
  const FrameGeometry geo{1500, 0.5, 256, 256};
  const Pose3D gt = translated(predict_pose(out, 1.0, geo, grid, {3, 4}, 0), {0, 0, 40});
  const auto r = full_backward(out, 1.0, gt, geo, grid, {3, 4}, LossSpace::kAbsolute);
  EXPECT_GT(std::accumulate(r.grad_depth.begin(), r.grad_depth.end(), 0.0,
                            [](double a, double b) { return a + std::abs(b); }),
            0.0);
}

TEST(FullBackward, RejectsShapeMismatch) {
  const auto grid = CoordinateGrid::make(GridSpec{});
  auto out = random_output(GridSpec{}, 2, 3);
  out.depth_logits.pop_back();
  EXPECT_THROW(full_backward(out, 1.0, testing::random_pose(2, 1), FrameGeometry{}, grid, {2, 16},
                             LossSpace::kAbsolute),
               ShapeError);
}

TEST(SyntheticSamples, ImagePointsAreTrueProjections) {
  SyntheticSetOptions o;
  o.c_true = 1.1;
  const auto samples = make_synthetic_samples(o);
  ASSERT_EQ(samples.size(), 4u);
  for (const auto& s : samples) {
    const double f = s.geometry.focal * s.geometry.scale * 1.1;
    for (std::size_t j = 0; j < s.target.joints.size(); ++j) {
      const Vec3& p = s.target.joints[j];
      EXPECT_NEAR(s.image_xy[j].x(), f * p.x() / p.z() + 128, 1e-9);
      EXPECT_NEAR(s.image_xy[j].y(), f * p.y() / p.z() + 128, 1e-9);
    }
  }
}

ToyTrainConfig small_config() {
  ToyTrainConfig c;
  c.steps = 300;
  c.joints = 5;
  return c;
}

std::vector<ToySample> small_samples() {
  SyntheticSetOptions o;
  o.joints = 5;
  o.samples = 3;
  return make_synthetic_samples(o);
}

TEST(ToyTrain, DeterministicAcrossThreadCounts) {
  auto c = small_config();
  const auto a = toy_train(c, small_samples());
  c.threads = 3;
  const auto b = toy_train(c, small_samples());
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.final_c, b.final_c);
}

TEST(ToyTrain, ConvergesAndSnapshotsAtCycleMinima) {
  const auto r = toy_train(small_config(), small_samples());
  EXPECT_LT(r.final_loss, 0.1 * r.initial_loss);
  EXPECT_EQ(r.snapshot_steps, (std::vector<std::int64_t>{100, 200, 300}));
  ASSERT_EQ(r.snapshot_predictions.size(), 3u);
}

TEST(ToyTrain, EnsembleNoWorseThanWorstSnapshot) {
  const auto samples = small_samples();
  const auto r = toy_train(small_config(), samples);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double worst = 0;
    for (const auto& snap : r.snapshot_predictions) {
      worst = std::max(worst, l1_loss(snap[i], samples[i].target, LossSpace::kRootRelative).value);
    }
    EXPECT_LE(l1_loss(r.ensemble_predictions[i], samples[i].target, LossSpace::kRootRelative).value,
              worst + 1e-12);
  }
}

TEST(ToyTrain, DivergenceReportsStep) {
  auto c = small_config();
  c.schedule = {1e300, 1e300, 100};
  try {
    toy_train(c, small_samples());
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_LT(e.step(), c.steps);
  }
}

}  // namespace
}  // namespace synocc
