#pragma once

#include "synocc/pose.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace synocc {

/// Left/right joint pairing for horizontal mirroring. Always an involution that fixes the
/// root joint; the constructor rejects anything else.
class JointFlipMap {
 public:
  JointFlipMap(std::vector<int> permutation, int root_index);

  /// 17-joint Human3.6M ordering: pelvis, r_hip, r_knee, r_ankle, l_hip, l_knee, l_ankle,
  /// spine, thorax, neck, head, l_shoulder, l_elbow, l_wrist, r_shoulder, r_elbow, r_wrist.
  /// The joint order is an assumption; the challenge data defines its own.
  static JointFlipMap h36m17();
  static JointFlipMap identity(int joints, int root_index = 0);

  int size() const { return static_cast<int>(perm_.size()); }
  int operator[](int j) const { return perm_.at(static_cast<std::size_t>(j)); }
  const std::vector<int>& permutation() const { return perm_; }

 private:
  std::vector<int> perm_;
};

/// Mean Euclidean joint error after subtracting each pose's root, in mm.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Mirror about the camera's Y-Z plane: X is negated and left/right joints are swapped.
Pose3D flip_pose(const Pose3D& pose, const JointFlipMap& map);

/// Mean of the plain prediction and the un-flipped prediction made on the mirrored input.
Pose3D tta_average(const Pose3D& pred_plain, const Pose3D& pred_from_flipped_input,
                   const JointFlipMap& map);

Pose3D ensemble_average(const std::vector<Pose3D>& preds);

struct EvalRecord {
  std::string frame_id;
  std::string action;
  Pose3D pred;
  Pose3D gt;
};

struct ActionRow {
  std::string action;
  double mpjpe_mm = 0.0;
  std::size_t frames = 0;
};

struct ActionReport {
  std::vector<ActionRow> actions;  // sorted by action name
  double frame_weighted_mm = 0.0;
  double action_weighted_mm = 0.0;
  std::size_t frames = 0;
};

ActionReport per_action_report(const std::vector<EvalRecord>& records);

/// CSV: `action,mpjpe_mm,frames` with the two summary rows `overall_frame_weighted` and
/// `overall_action_weighted` at the end.
void write_report_csv(const std::filesystem::path& path, const ActionReport& report);

/// A line of the pose interchange format:
/// `{"frame_id":..., "action":..., "joints":[[x,y,z],...], "root_index":...}`.
struct PoseRecord {
  std::string frame_id;
  std::string action;
  Pose3D pose;
};

std::vector<PoseRecord> read_pose_jsonl(const std::filesystem::path& path);
void write_pose_jsonl(const std::filesystem::path& path, const std::vector<PoseRecord>& records);

}  // namespace synocc
