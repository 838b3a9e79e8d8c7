#include "synocc/pose.hpp"

#include <string>

namespace synocc {

void Pose3D::validate() const {
  if (joints.empty()) throw std::invalid_argument("Pose3D: needs at least one joint");
  if (root_index < 0 || root_index >= size()) {
    throw std::invalid_argument("Pose3D: root_index " + std::to_string(root_index) +
                                " out of range for " + std::to_string(size()) + " joints");
  }
  for (const auto& j : joints) {
    if (!j.allFinite()) throw std::invalid_argument("Pose3D: non-finite joint coordinate");
  }
}

Pose3D root_relative(const Pose3D& pose) {
  pose.validate();
  Pose3D out = pose;
  const Vec3 root = pose.root();
  for (auto& j : out.joints) j -= root;
  return out;
}

Pose3D translated(const Pose3D& pose, const Vec3& offset) {
  Pose3D out = pose;
  for (auto& j : out.joints) j += offset;
  return out;
}

void require_compatible(const Pose3D& a, const Pose3D& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": joint count mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.root_index != b.root_index) {
    throw std::invalid_argument(std::string(what) + ": root_index mismatch");
  }
}

}  // namespace synocc
