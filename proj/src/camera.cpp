#include "synocc/camera.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace synocc {

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << f, 0, cx, 0, f, cy, 0, 0, 1;
  return k;
}

CropMode parse_crop_mode(const std::string& name) {
  if (name == "rotational") return CropMode::kRotational;
  if (name == "planar") return CropMode::kPlanar;
  throw std::invalid_argument("unknown crop mode '" + name + "' (expected rotational|planar)");
}

std::string to_string(CropMode mode) {
  return mode == CropMode::kRotational ? "rotational" : "planar";
}

Eigen::Vector2d CropTransform::apply(const Eigen::Vector2d& p) const {
  const Eigen::Vector3d q = homography * p.homogeneous();
  return q.hnormalized();
}

CropTransform crop_camera(const BoundingBox& box, const CameraIntrinsics& camera,
                          const CropOptions& options) {
  if (!(box.w > 0) || !(box.h > 0) || !std::isfinite(box.x) || !std::isfinite(box.y)) {
    throw GeometryError("crop_camera: degenerate box");
  }
  if (!(camera.f > 0)) throw GeometryError("crop_camera: focal length must be positive");
  if (options.out_size <= 0 || !(options.fill > 0)) {
    throw GeometryError("crop_camera: out_size and fill must be positive");
  }

  CropTransform t;
  t.s = options.fill * options.out_size / std::max(box.w, box.h);
  t.out_width = options.out_size;
  t.out_height = options.out_size;
  t.mode = options.mode;
  const double half = options.out_size / 2.0;
  const Eigen::Vector2d center = box.center();

  if (options.mode == CropMode::kPlanar) {
    t.homography << t.s, 0, half - t.s * center.x(),  //
        0, t.s, half - t.s * center.y(),              //
        0, 0, 1;
    return t;
  }

  const Eigen::Matrix3d k_orig = camera.matrix();
  Eigen::Matrix3d k_crop;
  k_crop << camera.f * t.s, 0, half, 0, camera.f * t.s, half, 0, 0, 1;

  const Eigen::Vector3d ray = (k_orig.inverse() * center.homogeneous()).normalized();
  const Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  const Eigen::Vector3d cross = ray.cross(axis);
  const double sin_angle = cross.norm();
  if (sin_angle > 0) {
    const double angle = std::atan2(sin_angle, ray.dot(axis));
    rotation = Eigen::AngleAxisd(angle, cross / sin_angle).toRotationMatrix();
  }
  t.homography = k_crop * rotation * k_orig.inverse();
  t.homography /= t.homography(2, 2);
  return t;
}

namespace {

// Bilinear sample at continuous image coordinates (pixel centers at +0.5).
inline void sample_bilinear(const Image& src, double xs, double ys, std::uint8_t* out) {
  const int channels = src.channels();
  if (xs < 0.0 || ys < 0.0 || xs > src.width() || ys > src.height()) {
    std::fill(out, out + channels, 0);
    return;
  }
  const double u = xs - 0.5;
  const double v = ys - 0.5;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const double ax = u - fu;
  const double ay = v - fv;
  const int x0 = std::clamp(static_cast<int>(fu), 0, src.width() - 1);
  const int y0 = std::clamp(static_cast<int>(fv), 0, src.height() - 1);
  const int x1 = std::clamp(static_cast<int>(fu) + 1, 0, src.width() - 1);
  const int y1 = std::clamp(static_cast<int>(fv) + 1, 0, src.height() - 1);
  for (int c = 0; c < channels; ++c) {
    const double top = (1.0 - ax) * src.at(x0, y0, c) + ax * src.at(x1, y0, c);
    const double bottom = (1.0 - ax) * src.at(x0, y1, c) + ax * src.at(x1, y1, c);
    const double value = (1.0 - ay) * top + ay * bottom;
    out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
  }
}

}  // namespace

Image warp_image(const Image& image, const Eigen::Matrix3d& homography, int out_width,
                 int out_height) {
  if (image.empty()) throw GeometryError("warp_image: empty input");
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(homography);
  if (!lu.isInvertible() || !homography.allFinite()) {
    throw GeometryError("warp_image: singular homography");
  }
  const Eigen::Matrix3d inverse = lu.inverse();
  Image out(out_width, out_height, image.channels());
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Eigen::Vector3d p = inverse * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
      std::uint8_t* dst = &out.at(x, y, 0);
      if (!(p.z() > 0)) {
        std::fill(dst, dst + image.channels(), 0);
        continue;
      }
      sample_bilinear(image, p.x() / p.z(), p.y() / p.z(), dst);
    }
  }
  return out;
}

Image warp_image(const Image& image, const CropTransform& transform) {
  return warp_image(image, transform.homography, transform.out_width, transform.out_height);
}

Eigen::Vector3d back_project(double x, double y, double dz, double zstar, const CropCamera& cam) {
  const double focal = cam.effective_focal();
  if (!(focal > 0)) throw GeometryError("back_project: f*s*c must be positive");
  const double z = zstar + dz;
  if (!(z > 0)) throw GeometryError("back_project: nonpositive effective depth");
  return {z * (x - cam.width / 2.0) / focal, z * (y - cam.height / 2.0) / focal, z};
}

Eigen::Vector2d project(const Eigen::Vector3d& point, double effective_focal, double width,
                        double height) {
  if (!(point.z() > 0)) throw GeometryError("project: point must have Z > 0");
  if (!(effective_focal > 0)) throw GeometryError("project: focal must be positive");
  return {effective_focal * point.x() / point.z() + width / 2.0,
          effective_focal * point.y() / point.z() + height / 2.0};
}

BackProjectJacobian back_project_grad(double x, double y, double dz, double zstar,
                                      const CropCamera& cam) {
  const double focal = cam.effective_focal();
  if (!(focal > 0)) throw GeometryError("back_project_grad: f*s*c must be positive");
  const double z = zstar + dz;
  if (!(z > 0)) throw GeometryError("back_project_grad: nonpositive effective depth");
  const double du = x - cam.width / 2.0;
  const double dv = y - cam.height / 2.0;

  BackProjectJacobian j = BackProjectJacobian::Zero();
  j(0, kGradX) = z / focal;
  j(0, kGradDz) = du / focal;
  j(0, kGradZstar) = du / focal;
  j(0, kGradC) = -z * du / (focal * cam.c);
  j(1, kGradY) = z / focal;
  j(1, kGradDz) = dv / focal;
  j(1, kGradZstar) = dv / focal;
  j(1, kGradC) = -z * dv / (focal * cam.c);
  j(2, kGradDz) = 1.0;
  j(2, kGradZstar) = 1.0;
  return j;
}

std::map<std::string, Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detections file " + path.string());
  std::map<std::string, Detection> by_frame;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Detection det;
    try {
      const auto j = nlohmann::json::parse(line);
      det.frame_id = j.at("frame_id").get<std::string>();
      det.box = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
                 j.at("h").get<double>()};
      det.score = j.value("score", 1.0);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto it = by_frame.find(det.frame_id);
    if (it == by_frame.end()) {
      by_frame.emplace(det.frame_id, det);
    } else if (det.score > it->second.score) {
      it->second = det;
    }
  }
  return by_frame;
}

}  // namespace synocc
