#include "fixtures.hpp"
#include "synocc/camera.hpp"
#include "synocc/rng.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <fstream>

namespace synocc {
namespace {

// Oracle: generic 3x3 inverse of the crop intrinsics, applied to the homogeneous pixel.
Eigen::Vector3d back_project_oracle(double x, double y, double dz, double zstar, const CropCamera& cam) {
  Eigen::Matrix3d k;
  const double f = cam.f * cam.s * cam.c;
  k << f, 0, cam.width / 2, 0, f, cam.height / 2, 0, 0, 1;
  return (zstar + dz) * (k.inverse() * Eigen::Vector3d(x, y, 1.0));
}

TEST(BackProject, MatchesExplicitInverse) {
  Rng rng = Rng::for_frame(11, "bp");
  for (int i = 0; i < 1000; ++i) {
    const CropCamera cam{rng.uniform(300, 3000), rng.uniform(0.1, 3), rng.uniform(0.8, 1.2), 256, 256};
    const double x = rng.uniform(0, 256), y = rng.uniform(0, 256);
    const double dz = rng.uniform(-1000, 1000), zs = rng.uniform(1500, 9000);
    const Eigen::Vector3d got = back_project(x, y, dz, zs, cam);
    const Eigen::Vector3d want = back_project_oracle(x, y, dz, zs, cam);
    EXPECT_LE((got - want).norm(), 1e-9 * want.norm());
  }
}

TEST(BackProject, PrincipalPointLiesOnOpticalAxis) {
  const Eigen::Vector3d p = back_project(128, 128, 250, 4000, CropCamera{});
  EXPECT_EQ(p.x(), 0.0);
  EXPECT_EQ(p.y(), 0.0);
  EXPECT_EQ(p.z(), 4250.0);
}

TEST(BackProject, DepthIsExactSum) {
  Rng rng = Rng::for_frame(12, "sum");
  for (int i = 0; i < 1000; ++i) {
    const double dz = rng.uniform(-1000, 1000), zs = rng.uniform(1500, 9000);
    EXPECT_EQ(back_project(rng.uniform(0, 256), rng.uniform(0, 256), dz, zs, CropCamera{}).z(), zs + dz);
  }
}

TEST(BackProject, ProjectIsLeftInverse) {
  Rng rng = Rng::for_frame(13, "rt");
  for (int i = 0; i < 10000; ++i) {
    const CropCamera cam{rng.uniform(300, 3000), rng.uniform(0.1, 3), rng.uniform(0.8, 1.2), 256, 256};
    const double x = rng.uniform(0, 256), y = rng.uniform(0, 256);
    const Eigen::Vector3d p = back_project(x, y, rng.uniform(-1000, 1000), rng.uniform(1500, 9000), cam);
    const Eigen::Vector2d q = project(p, cam.effective_focal(), cam.width, cam.height);
    EXPECT_LE(std::abs(q.x() - x), 1e-9 * std::max(1.0, x));
    EXPECT_LE(std::abs(q.y() - y), 1e-9 * std::max(1.0, y));
  }
}

TEST(BackProject, RejectsNonPositiveDepthAndFocal) {
  EXPECT_THROW(back_project(10, 10, -5000, 4000, CropCamera{}), GeometryError);
  EXPECT_THROW(back_project(10, 10, 0, 4000, CropCamera{1500, 1, 0, 256, 256}), GeometryError);
}

TEST(BackProjectGrad, ClosedForm) {
  const CropCamera cam{1500, 0.5, 1.1, 256, 256};
  const double x = 200, y = 40, dz = 120, zs = 5000;
  const auto j = back_project_grad(x, y, dz, zs, cam);
  const double f = cam.effective_focal(), z = zs + dz;
  EXPECT_NEAR(j(0, kGradX), z / f, 1e-12);
  EXPECT_NEAR(j(1, kGradY), z / f, 1e-12);
  EXPECT_NEAR(j(0, kGradDz), (x - 128) / f, 1e-12);
  EXPECT_NEAR(j(0, kGradZstar), (x - 128) / f, 1e-12);
  EXPECT_NEAR(j(2, kGradDz), 1.0, 0);
  EXPECT_NEAR(j(0, kGradC), -z * (x - 128) / (f * cam.c), 1e-9);
  EXPECT_EQ(j(2, kGradC), 0.0);
}

TEST(CropCamera, PlanarMapsBoxCenterAndScale) {
  const BoundingBox box{100, 50, 80, 200};
  const auto t = crop_camera(box, CameraIntrinsics::centered(1500, 640, 480), {256, 0.9, CropMode::kPlanar});
  EXPECT_DOUBLE_EQ(t.s, 0.9 * 256 / 200);
  const Eigen::Vector2d c = t.apply(box.center());
  EXPECT_NEAR(c.x(), 128, 1e-12);
  EXPECT_NEAR(c.y(), 128, 1e-12);
  const Eigen::Vector2d top = t.apply({140, 50});
  EXPECT_NEAR(128 - top.y(), 0.9 * 128, 1e-9);
}

TEST(CropCamera, RotationalCentersBoxAndMatchesVirtualCamera) {
  const auto cam = CameraIntrinsics::centered(1200, 1000, 1000);
  const BoundingBox box{650, 120, 150, 300};
  const auto t = crop_camera(box, cam, {256, 0.9, CropMode::kRotational});
  const Eigen::Vector2d c = t.apply(box.center());
  EXPECT_NEAR(c.x(), 128, 1e-9);
  EXPECT_NEAR(c.y(), 128, 1e-9);
  EXPECT_EQ(t.homography(2, 2), 1.0);

  // Oracle: rotate a 3D point with the shortest-arc rotation taking the box-center ray to
  // +Z, project with the crop intrinsics, compare with the homography applied to its
  // original projection.
  const Eigen::Vector3d ray(box.center().x() - 500, box.center().y() - 500, 1200);
  const Eigen::Matrix3d r =
      Eigen::Quaterniond::FromTwoVectors(ray, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  Rng rng = Rng::for_frame(3, "virt");
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000), rng.uniform(3000, 8000));
    const Eigen::Vector2d orig(1200 * p.x() / p.z() + 500, 1200 * p.y() / p.z() + 500);
    const Eigen::Vector3d q = r * p;
    const double fc = 1200 * t.s;
    const Eigen::Vector2d want(fc * q.x() / q.z() + 128, fc * q.y() / q.z() + 128);
    EXPECT_LE((t.apply(orig) - want).norm(), 1e-8);
  }
}

TEST(CropCamera, RotationalEqualsPlanarOnAxis) {
  const auto cam = CameraIntrinsics::centered(1500, 640, 480);
  const BoundingBox box{270, 190, 100, 100};
  const auto a = crop_camera(box, cam, {256, 0.9, CropMode::kRotational});
  const auto b = crop_camera(box, cam, {256, 0.9, CropMode::kPlanar});
  EXPECT_LE((a.homography - b.homography).norm(), 1e-12);
}

TEST(CropCamera, RejectsDegenerateBox) {
  EXPECT_THROW(crop_camera({0, 0, 0, 10}, CameraIntrinsics::centered(1500, 64, 64)), GeometryError);
}

TEST(WarpImage, IdentityAndIntegerShift) {
  Image img(10, 8, 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(x * 20 + y + c);
  EXPECT_EQ(warp_image(img, Eigen::Matrix3d::Identity(), 10, 8), img);

  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = 3;  // output x = input x + 3
  const Image out = warp_image(img, shift, 10, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 3; ++x) EXPECT_EQ(out.at(x, y, 0), 0) << "outside source";
    for (int x = 3; x < 10; ++x) EXPECT_EQ(out.at(x, y, 1), img.at(x - 3, y, 1));
  }
}

TEST(WarpImage, SingularHomographyThrows) {
  EXPECT_THROW(warp_image(Image(4, 4, 3), Eigen::Matrix3d::Zero(), 4, 4), GeometryError);
}

TEST(Detections, KeepsBestScorePerFrame) {
  testing::TempDir dir;
  std::ofstream(dir / "b.jsonl") << R"({"frame_id":"a","x":1,"y":2,"w":3,"h":4,"score":0.5})" "\n"
                                 << R"({"frame_id":"a","x":9,"y":9,"w":9,"h":9,"score":0.8})" "\n"
                                 << "\n"
                                 << R"({"frame_id":"b","x":0,"y":0,"w":5,"h":5})" "\n";
  const auto d = read_detections(dir / "b.jsonl");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.at("a").box.x, 9);
  EXPECT_EQ(d.at("b").score, 1.0);
}

}  // namespace
}  // namespace synocc
