#pragma once

#include "synocc/image.hpp"
#include "synocc/pose.hpp"
#include "synocc/voc.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace synocc::testing {

// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "synocc");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Hand-enumerated VOC-layout mini dataset. Six annotated objects over three images:
//   img 1: dog (kept), person (class rule)
//   img 2: car difficult (difficult rule), sheep truncated (truncated rule)
//   img 3: bottle 20x20 = 400 px (area rule), cat (kept)
// Each instance is outlined by a one-pixel void (255) border. train.txt lists images 1-2,
// val.txt image 3.
struct VocFixtureCounts {
  std::size_t images = 3;
  std::size_t annotated = 6;
  std::size_t after_class = 5;
  std::size_t after_difficult = 4;
  std::size_t after_truncated = 3;
  std::size_t after_area = 2;
  int dog_area = 30 * 20;
  int cat_area = 25 * 24;
};
VocFixtureCounts write_voc_fixture(const std::filesystem::path& root);

// Synthetic occluder library: n solid-color ellipses of varying size.
OccluderLibrary synthetic_library(int n, std::uint64_t seed = 1);

// n gradient frames of the given size as PNG, plus a boxes JSONL covering every frame
// except those whose index is listed in `without_box`.
void write_frame_set(const std::filesystem::path& images_dir, const std::filesystem::path& boxes,
                     int n, int width, int height, const std::vector<int>& without_box = {});

// Byte-level comparison of two directory trees; empty when identical.
std::vector<std::string> diff_trees(const std::filesystem::path& a, const std::filesystem::path& b);

Pose3D random_pose(int joints, std::uint64_t seed, int root_index = 0);

std::string read_file(const std::filesystem::path& path);

}  // namespace synocc::testing
