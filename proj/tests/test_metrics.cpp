#include "fixtures.hpp"
#include "synocc/metrics.hpp"
#include "synocc/rng.hpp"

#include <gtest/gtest.h>

namespace synocc {
namespace {

// Integer millimeter coordinates keep every subtraction in the metric exact.
Pose3D integer_pose(int joints, std::uint64_t seed) {
  Rng rng = Rng::for_frame(seed, "ipose");
  Pose3D p;
  for (int j = 0; j < joints; ++j) {
    p.joints.emplace_back(static_cast<double>(rng.uniform_int(-900, 900)),
                          static_cast<double>(rng.uniform_int(-900, 900)),
                          static_cast<double>(rng.uniform_int(3000, 6000)));
  }
  return p;
}

TEST(Mpjpe, ZeroForIdentity) {
  const Pose3D p = testing::random_pose(17, 1);
  EXPECT_EQ(mpjpe(p, p), 0.0);
}

TEST(Mpjpe, TranslationInvariantExactly) {
  const Pose3D a = integer_pose(17, 2), b = integer_pose(17, 3);
  EXPECT_EQ(mpjpe(a, b), mpjpe(translated(a, {17, -230, 4}), translated(b, {-91, 5, 1200})));
}

TEST(Mpjpe, SingleJointHandValue) {
  const Pose3D gt = integer_pose(17, 4);
  Pose3D pred = gt;
  pred.joints[5] += Vec3(3, 4, 0);
  EXPECT_NEAR(mpjpe(pred, gt), 5.0 / 17.0, 1e-9);
}

TEST(Mpjpe, SymmetricAndNonNegative) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Pose3D a = testing::random_pose(17, s), b = testing::random_pose(17, s + 100);
    EXPECT_EQ(mpjpe(a, b), mpjpe(b, a));
    EXPECT_GT(mpjpe(a, b), 0.0);
  }
}

TEST(Mpjpe, RejectsMismatch) {
  EXPECT_THROW(mpjpe(testing::random_pose(17, 1), testing::random_pose(16, 1)), std::invalid_argument);
}

TEST(FlipMap, ValidatesInvolutionAndRoot) {
  EXPECT_NO_THROW(JointFlipMap::h36m17());
  EXPECT_THROW(JointFlipMap({1, 2, 0}, 0), std::invalid_argument);
  EXPECT_THROW(JointFlipMap({1, 0, 2}, 0), std::invalid_argument);
  EXPECT_THROW(JointFlipMap({0, 5}, 0), std::invalid_argument);
  const auto m = JointFlipMap::h36m17();
  for (int j = 0; j < 17; ++j) EXPECT_EQ(m[m[j]], j);
  EXPECT_EQ(m[1], 4);
  EXPECT_EQ(m[11], 14);
}

TEST(FlipPose, NegatesXAndSwapsSides) {
  const auto m = JointFlipMap::h36m17();
  const Pose3D p = testing::random_pose(17, 5);
  const Pose3D f = flip_pose(p, m);
  for (int j = 0; j < 17; ++j) {
    EXPECT_EQ(f.joints[m[j]], Vec3(-p.joints[j].x(), p.joints[j].y(), p.joints[j].z()));
  }
}

TEST(FlipPose, ExactInvolutionAndIsometry) {
  const auto m = JointFlipMap::h36m17();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Pose3D a = testing::random_pose(17, s), b = testing::random_pose(17, s + 50);
    EXPECT_EQ(flip_pose(flip_pose(a, m), m), a);
    EXPECT_NEAR(mpjpe(flip_pose(a, m), flip_pose(b, m)), mpjpe(a, b), 1e-12);
  }
}

TEST(Averaging, TtaArithmetic) {
  const auto m = JointFlipMap::h36m17();
  const Pose3D plain = integer_pose(17, 6), mirrored = integer_pose(17, 7);
  const Pose3D avg = tta_average(plain, mirrored, m);
  const Pose3D unflipped = flip_pose(mirrored, m);
  for (int j = 0; j < 17; ++j) EXPECT_EQ(avg.joints[j], 0.5 * (plain.joints[j] + unflipped.joints[j]));
  // A consistent model (mirrored prediction is the mirror of the plain one) is unchanged.
  EXPECT_EQ(tta_average(plain, flip_pose(plain, m), m), plain);
}

TEST(Averaging, EnsembleArithmetic) {
  const Pose3D a = integer_pose(17, 8), b = integer_pose(17, 9);
  EXPECT_EQ(ensemble_average({a, a, a}), a);
  const Pose3D mid = ensemble_average({a, b});
  for (int j = 0; j < 17; ++j) EXPECT_EQ(mid.joints[j], 0.5 * (a.joints[j] + b.joints[j]));
  EXPECT_THROW(ensemble_average({}), std::invalid_argument);
}

EvalRecord record(const std::string& id, const std::string& action, double error_mm) {
  Pose3D gt = integer_pose(2, 10);
  Pose3D pred = gt;
  // Error on one of two joints is doubled back by the mean.
  pred.joints[1].x() += 2 * error_mm;
  return {id, action, pred, gt};
}

TEST(ActionReport, FrameAndActionWeighting) {
  const auto r = per_action_report({record("a", "Walk", 10), record("b", "Walk", 20), record("c", "Sit", 60)});
  ASSERT_EQ(r.actions.size(), 2u);
  EXPECT_EQ(r.actions[0].action, "Sit");
  EXPECT_NEAR(r.actions[1].mpjpe_mm, 15.0, 1e-12);
  EXPECT_NEAR(r.frame_weighted_mm, 30.0, 1e-12);
  EXPECT_NEAR(r.action_weighted_mm, 37.5, 1e-12);
  EXPECT_EQ(r.frames, 3u);
}

TEST(ActionReport, OrderInvariant) {
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(record(std::to_string(i), i % 3 ? "A" : "B", 0.1 * i + 0.01));
  const auto a = per_action_report(recs);
  std::reverse(recs.begin(), recs.end());
  const auto b = per_action_report(recs);
  EXPECT_EQ(a.frame_weighted_mm, b.frame_weighted_mm);
  EXPECT_EQ(a.actions[0].mpjpe_mm, b.actions[0].mpjpe_mm);
}

TEST(ActionReport, CsvLayout) {
  testing::TempDir dir;
  write_report_csv(dir / "r.csv", per_action_report({record("a", "Walk", 10), record("b", "Walk", 20)}));
  EXPECT_EQ(testing::read_file(dir / "r.csv"),
            "action,mpjpe_mm,frames\nWalk,15.000000,2\noverall_frame_weighted,15.000000,2\n"
            "overall_action_weighted,15.000000,2\n");
}

TEST(PoseJsonl, RoundTrip) {
  testing::TempDir dir;
  std::vector<PoseRecord> recs = {{"f1", "Walk", testing::random_pose(17, 1)},
                                  {"f2", "Eat", testing::random_pose(17, 2, 3)}};
  write_pose_jsonl(dir / "p.jsonl", recs);
  const auto back = read_pose_jsonl(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].frame_id, "f2");
  EXPECT_EQ(back[1].pose, recs[1].pose);
  EXPECT_EQ(back[0].action, "Walk");
}

}  // namespace
}  // namespace synocc
