#pragma once

#include "synocc/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

namespace synocc {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pinhole intrinsics of the original (uncropped) camera, in pixels.
struct CameraIntrinsics {
  double f = 1500.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Principal point at the image center, the assumption used when intrinsics are unknown.
  static CameraIntrinsics centered(double f, int width, int height) {
    return {f, width / 2.0, height / 2.0, width, height};
  }

  Eigen::Matrix3d matrix() const;
};

/// Person box in original-image pixels; (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;

  Eigen::Vector2d center() const { return {x + w / 2.0, y + h / 2.0}; }
};

enum class CropMode { kRotational, kPlanar };

CropMode parse_crop_mode(const std::string& name);
std::string to_string(CropMode mode);

struct CropOptions {
  int out_size = 256;
  double fill = 0.9;
  CropMode mode = CropMode::kRotational;
};

/// Maps original-image pixels to crop pixels.
struct CropTransform {
  Eigen::Matrix3d homography = Eigen::Matrix3d::Identity();
  double s = 1.0;
  int out_width = 256;
  int out_height = 256;
  CropMode mode = CropMode::kRotational;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
};

/// Learnable global focal correction; 1.0 means no correction.
struct FocalCorrection {
  double c = 1.0;
};

/// Person-centric crop: the larger box side fills `fill` of the output.
///
/// Planar mode translates the box center to the crop center and scales by s. Rotational
/// mode builds the virtual camera K_crop * R * K_orig^-1, where R is the smallest rotation
/// taking the ray through the box center onto the optical axis and K_crop has focal f*s
/// with the principal point at the crop center.
CropTransform crop_camera(const BoundingBox& box, const CameraIntrinsics& camera,
                          const CropOptions& options = {});

/// Inverse-warp resampling with bilinear interpolation. Output pixels whose source point
/// falls outside the input are black.
Image warp_image(const Image& image, const CropTransform& transform);
Image warp_image(const Image& image, const Eigen::Matrix3d& homography, int out_width,
                 int out_height);

/// Intrinsics of the crop camera as used for back-projection: focal f*s*c, principal
/// point at (W/2, H/2) of the crop.
struct CropCamera {
  double f = 1500.0;
  double s = 1.0;
  double c = 1.0;
  double width = 256.0;
  double height = 256.0;

  double effective_focal() const { return f * s * c; }
};

/// (Zstar + dZ) * K^-1 * (x, y, 1) with K = [[fsc, 0, W/2], [0, fsc, H/2], [0, 0, 1]].
/// Throws GeometryError if fsc <= 0 or Zstar + dZ <= 0.
Eigen::Vector3d back_project(double x, double y, double dz, double zstar, const CropCamera& cam);

/// Inverse of back_project for a point with Z > 0.
Eigen::Vector2d project(const Eigen::Vector3d& point, double effective_focal, double width,
                        double height);

/// Columns of the back-projection Jacobian.
enum BackProjectInput : int { kGradX = 0, kGradY = 1, kGradDz = 2, kGradZstar = 3, kGradC = 4 };

/// d(X, Y, Z) / d(x, y, dZ, Zstar, c), columns ordered as BackProjectInput.
using BackProjectJacobian = Eigen::Matrix<double, 3, 5>;

BackProjectJacobian back_project_grad(double x, double y, double dz, double zstar,
                                      const CropCamera& cam);

/// One person detection from an external detector, JSON-lines
/// `{frame_id, x, y, w, h, score}`.
struct Detection {
  std::string frame_id;
  BoundingBox box;
  double score = 0.0;
};

/// Keeps the highest-scoring box per frame; ties keep the first seen.
std::map<std::string, Detection> read_detections(const std::filesystem::path& path);

}  // namespace synocc
