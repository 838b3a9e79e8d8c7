#include "synocc/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace synocc {

JointFlipMap::JointFlipMap(std::vector<int> permutation, int root_index)
    : perm_(std::move(permutation)) {
  const int n = size();
  if (n == 0) throw std::invalid_argument("JointFlipMap: empty permutation");
  for (int j = 0; j < n; ++j) {
    const int partner = perm_[static_cast<std::size_t>(j)];
    if (partner < 0 || partner >= n) {
      throw std::invalid_argument("JointFlipMap: index out of range at joint " + std::to_string(j));
    }
    if (perm_[static_cast<std::size_t>(partner)] != j) {
      throw std::invalid_argument("JointFlipMap: not an involution at joint " + std::to_string(j));
    }
  }
  if (root_index < 0 || root_index >= n || perm_[static_cast<std::size_t>(root_index)] != root_index) {
    throw std::invalid_argument("JointFlipMap: root joint must map to itself");
  }
}

JointFlipMap JointFlipMap::h36m17() {
  return JointFlipMap({0, 4, 5, 6, 1, 2, 3, 7, 8, 9, 10, 14, 15, 16, 11, 12, 13}, 0);
}

JointFlipMap JointFlipMap::identity(int joints, int root_index) {
  std::vector<int> perm(static_cast<std::size_t>(joints));
  for (int j = 0; j < joints; ++j) perm[static_cast<std::size_t>(j)] = j;
  return JointFlipMap(std::move(perm), root_index);
}

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  require_compatible(pred, gt, "mpjpe");
  pred.validate();
  gt.validate();
  const Vec3 pred_root = pred.root();
  const Vec3 gt_root = gt.root();
  double total = 0.0;
  for (int j = 0; j < pred.size(); ++j) {
    const auto idx = static_cast<std::size_t>(j);
    total += ((pred.joints[idx] - pred_root) - (gt.joints[idx] - gt_root)).norm();
  }
  return total / pred.size();
}

Pose3D flip_pose(const Pose3D& pose, const JointFlipMap& map) {
  if (map.size() != pose.size()) {
    throw std::invalid_argument("flip_pose: flip map has " + std::to_string(map.size()) +
                                " joints, pose has " + std::to_string(pose.size()));
  }
  Pose3D out = pose;
  for (int j = 0; j < pose.size(); ++j) {
    Vec3 mirrored = pose.joints[static_cast<std::size_t>(j)];
    mirrored.x() = -mirrored.x();
    out.joints[static_cast<std::size_t>(map[j])] = mirrored;
  }
  return out;
}

Pose3D tta_average(const Pose3D& pred_plain, const Pose3D& pred_from_flipped_input,
                   const JointFlipMap& map) {
  require_compatible(pred_plain, pred_from_flipped_input, "tta_average");
  const Pose3D unflipped = flip_pose(pred_from_flipped_input, map);
  Pose3D out = pred_plain;
  for (std::size_t j = 0; j < out.joints.size(); ++j) {
    out.joints[j] = 0.5 * (pred_plain.joints[j] + unflipped.joints[j]);
  }
  return out;
}

Pose3D ensemble_average(const std::vector<Pose3D>& preds) {
  if (preds.empty()) throw std::invalid_argument("ensemble_average: empty prediction list");
  Pose3D out = preds.front();
  for (std::size_t i = 1; i < preds.size(); ++i) {
    require_compatible(preds.front(), preds[i], "ensemble_average");
    for (std::size_t j = 0; j < out.joints.size(); ++j) out.joints[j] += preds[i].joints[j];
  }
  const double n = static_cast<double>(preds.size());
  for (auto& joint : out.joints) joint /= n;
  return out;
}

ActionReport per_action_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw std::invalid_argument("per_action_report: no records");
  // Sum in a fixed order so the result does not depend on record order.
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_action;
  for (const auto& r : records) by_action[r.action].emplace_back(r.frame_id, mpjpe(r.pred, r.gt));

  ActionReport report;
  double frame_total = 0.0;
  for (auto& [action, values] : by_action) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (const auto& [frame, value] : values) sum += value;
    frame_total += sum;
    report.actions.push_back({action, sum / static_cast<double>(values.size()), values.size()});
    report.frames += values.size();
  }
  report.frame_weighted_mm = frame_total / static_cast<double>(report.frames);
  double action_total = 0.0;
  for (const auto& row : report.actions) action_total += row.mpjpe_mm;
  report.action_weighted_mm = action_total / static_cast<double>(report.actions.size());
  return report;
}

void write_report_csv(const std::filesystem::path& path, const ActionReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << "action,mpjpe_mm,frames\n" << std::fixed << std::setprecision(6);
  for (const auto& row : report.actions) {
    out << row.action << ',' << row.mpjpe_mm << ',' << row.frames << '\n';
  }
  out << "overall_frame_weighted," << report.frame_weighted_mm << ',' << report.frames << '\n';
  out << "overall_action_weighted," << report.action_weighted_mm << ',' << report.frames << '\n';
}

std::vector<PoseRecord> read_pose_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose file " + path.string());
  std::vector<PoseRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PoseRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.frame_id = j.at("frame_id").get<std::string>();
      rec.action = j.value("action", std::string());
      rec.pose.root_index = j.value("root_index", 0);
      for (const auto& joint : j.at("joints")) {
        const auto xyz = joint.get<std::vector<double>>();
        if (xyz.size() != 3) throw std::runtime_error("joint must have 3 coordinates");
        rec.pose.joints.emplace_back(xyz[0], xyz[1], xyz[2]);
      }
      rec.pose.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_pose_jsonl(const std::filesystem::path& path, const std::vector<PoseRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pose file " + path.string());
  for (const auto& rec : records) {
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& p : rec.pose.joints) joints.push_back({p.x(), p.y(), p.z()});
    const nlohmann::json j = {{"frame_id", rec.frame_id},
                              {"action", rec.action},
                              {"joints", joints},
                              {"root_index", rec.pose.root_index}};
    out << j.dump() << '\n';
  }
}

}  // namespace synocc
