#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace synocc {

using Vec3 = Eigen::Vector3d;

/// Camera-space joint positions in millimeters with a designated root (pelvis) joint.
struct Pose3D {
  std::vector<Vec3> joints;
  int root_index = 0;

  int size() const { return static_cast<int>(joints.size()); }
  const Vec3& root() const { return joints.at(static_cast<std::size_t>(root_index)); }

  /// Throws std::invalid_argument unless J >= 1, the root index is in range and all
  /// coordinates are finite.
  void validate() const;

  friend bool operator==(const Pose3D& a, const Pose3D& b) {
    return a.root_index == b.root_index && a.joints == b.joints;
  }
};

/// Every joint minus the root joint; the root of the result is exactly zero.
Pose3D root_relative(const Pose3D& pose);

Pose3D translated(const Pose3D& pose, const Vec3& offset);

/// Throws std::invalid_argument unless both poses share J and root_index.
void require_compatible(const Pose3D& a, const Pose3D& b, const char* what);

}  // namespace synocc
