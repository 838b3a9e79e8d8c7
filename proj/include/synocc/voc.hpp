#pragma once

#include "synocc/image.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace synocc {

class VocParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest/cutout mismatch or missing library files.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnnotationObject {
  std::string class_name;
  bool difficult = false;
  bool truncated = false;
  int xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  int instance_index = 1;  // 1-based document order = palette index in the instance mask

  friend bool operator==(const AnnotationObject&, const AnnotationObject&) = default;
};

/// One AnnotationObject per <object>, in document order.
std::vector<AnnotationObject> parse_annotation(std::string_view xml);

/// Tight-cropped occluder: RGB pixels plus a binary alpha mask (0 or 255).
struct SegmentedObject {
  Image pixels;
  Image alpha;
  int area_px = 0;
  std::string class_name;
  std::string source_id;
  int instance_index = 0;

  /// "<source_id>_<instance index, two digits>"
  std::string id() const;
  /// Throws IntegrityError when alpha/pixels disagree, the area is wrong or the crop
  /// is not tight.
  void validate() const;

  friend bool operator==(const SegmentedObject&, const SegmentedObject&) = default;
};

struct ExtractResult {
  std::vector<SegmentedObject> objects;
  std::vector<std::string> warnings;
};

/// Cuts out every annotated instance from the palette-indexed mask. Void (255) pixels are
/// never part of a cutout. Instances absent from the mask are skipped with a warning.
ExtractResult extract_cutouts(const Image& image, const Image& instance_mask,
                              const std::vector<AnnotationObject>& annotations,
                              const std::string& source_id = {});

struct FilterRules {
  std::set<std::string> exclude_classes{"person"};
  bool exclude_difficult = true;
  bool exclude_truncated = true;
  int min_area_px = 500;

  void validate() const;
  bool accepts(const SegmentedObject& object, const AnnotationObject& annotation) const;
};

/// Keeps objects whose class, flags and mask area pass the rules; order preserved.
/// `objects` and `annotations` are aligned one-to-one.
std::vector<SegmentedObject> filter_objects(const std::vector<SegmentedObject>& objects,
                                            const std::vector<AnnotationObject>& annotations,
                                            const FilterRules& rules);

struct ManifestEntry {
  std::string id;
  std::string class_name;
  int area_px = 0;
  std::string source_id;
  int width = 0;
  int height = 0;
  int instance_index = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Immutable after construction; safe to share across threads.
struct OccluderLibrary {
  std::vector<SegmentedObject> objects;
  std::vector<ManifestEntry> manifest;

  std::size_t size() const { return objects.size(); }
  static OccluderLibrary from_objects(std::vector<SegmentedObject> objects);

  friend bool operator==(const OccluderLibrary&, const OccluderLibrary&) = default;
};

/// Counts after each rule, applied in this order.
struct FilterBreakdown {
  std::size_t annotated = 0;
  std::size_t missing_mask = 0;
  std::size_t extracted = 0;
  std::size_t after_class = 0;
  std::size_t after_difficult = 0;
  std::size_t after_truncated = 0;
  std::size_t after_area = 0;
};

struct BuildOptions {
  std::filesystem::path dataset_root;
  std::filesystem::path out_dir;
  FilterRules rules;
  std::string split = "trainval";
  int threads = 1;
};

struct BuildResult {
  OccluderLibrary library;
  FilterBreakdown breakdown;
  std::size_t images = 0;
  // Retained counts restricted to the other segmentation split lists found under
  // ImageSets/Segmentation (e.g. "train", "val").
  std::map<std::string, std::size_t> subset_counts;
  std::vector<std::string> warnings;
};

/// Reads Annotations/, JPEGImages/ and SegmentationObject/ under the dataset root for the
/// ids listed in ImageSets/Segmentation/<split>.txt (or every mask when that list is
/// absent), filters, and writes the library to out_dir. Throws IngestError when nothing
/// survives the filters.
BuildResult build_library(const BuildOptions& options);

/// `<dir>/manifest.json` plus `<dir>/cutouts/<id>.png` (RGBA, alpha in {0, 255}).
void write_library(const std::filesystem::path& dir, const OccluderLibrary& library);
OccluderLibrary load_library(const std::filesystem::path& dir);

}  // namespace synocc
