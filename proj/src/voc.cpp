#include "synocc/voc.hpp"

#include "synocc/parallel.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <tuple>

namespace synocc {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

int parse_int_field(const pt::ptree& node, const std::string& path, int object_index) {
  const std::string where = "object " + std::to_string(object_index) + " <" + path + ">";
  const auto value = node.get_optional<std::string>(path);
  if (!value) throw VocParseError("missing required element " + where);
  const std::string text = trim(*value);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw VocParseError("non-integer value '" + text + "' in " + where);
  }
  return out;
}

bool parse_flag(const pt::ptree& node, const std::string& name) {
  const auto value = node.get_optional<std::string>(name);
  return value && trim(*value) == "1";
}

}  // namespace

std::vector<AnnotationObject> parse_annotation(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw VocParseError(std::string("malformed annotation XML: ") + e.what());
  }
  const auto root = tree.get_child_optional("annotation");
  if (!root) throw VocParseError("missing <annotation> root element");

  std::vector<AnnotationObject> objects;
  int index = 0;
  for (const auto& [tag, node] : *root) {
    if (tag != "object") continue;
    ++index;
    AnnotationObject obj;
    const auto name = node.get_optional<std::string>("name");
    if (!name || trim(*name).empty()) {
      throw VocParseError("missing required element object " + std::to_string(index) + " <name>");
    }
    obj.class_name = trim(*name);
    obj.difficult = parse_flag(node, "difficult");
    obj.truncated = parse_flag(node, "truncated");
    if (!node.get_child_optional("bndbox")) {
      throw VocParseError("missing required element object " + std::to_string(index) + " <bndbox>");
    }
    obj.xmin = parse_int_field(node, "bndbox.xmin", index);
    obj.ymin = parse_int_field(node, "bndbox.ymin", index);
    obj.xmax = parse_int_field(node, "bndbox.xmax", index);
    obj.ymax = parse_int_field(node, "bndbox.ymax", index);
    if (obj.xmin >= obj.xmax || obj.ymin >= obj.ymax) {
      throw VocParseError("object " + std::to_string(index) + " <bndbox> has xmin >= xmax or ymin >= ymax");
    }
    obj.instance_index = index;
    objects.push_back(std::move(obj));
  }
  return objects;
}

std::string SegmentedObject::id() const {
  std::array<char, 16> suffix{};
  std::snprintf(suffix.data(), suffix.size(), "_%02d", instance_index);
  return source_id + suffix.data();
}

void SegmentedObject::validate() const {
  const std::string name = id();
  if (alpha.channels() != 1 || pixels.channels() != 3) {
    throw IntegrityError(name + ": expected RGB pixels and a one-channel alpha");
  }
  if (alpha.width() != pixels.width() || alpha.height() != pixels.height()) {
    throw IntegrityError(name + ": alpha and pixels differ in size");
  }
  int count = 0;
  int min_x = alpha.width(), min_y = alpha.height(), max_x = -1, max_y = -1;
  for (int y = 0; y < alpha.height(); ++y) {
    for (int x = 0; x < alpha.width(); ++x) {
      const std::uint8_t a = alpha.at(x, y, 0);
      if (a != 0 && a != 255) throw IntegrityError(name + ": alpha is not binary");
      if (a == 255) {
        ++count;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
      }
    }
  }
  if (count != area_px) {
    throw IntegrityError(name + ": area " + std::to_string(area_px) + " but mask has " +
                         std::to_string(count) + " on-pixels");
  }
  if (count < 1) throw IntegrityError(name + ": empty mask");
  if (min_x != 0 || min_y != 0 || max_x != alpha.width() - 1 || max_y != alpha.height() - 1) {
    throw IntegrityError(name + ": cutout is not tightly cropped");
  }
}

ExtractResult extract_cutouts(const Image& image, const Image& instance_mask,
                              const std::vector<AnnotationObject>& annotations,
                              const std::string& source_id) {
  if (image.width() != instance_mask.width() || image.height() != instance_mask.height()) {
    throw IngestError("extract_cutouts: image " + std::to_string(image.width()) + "x" +
                      std::to_string(image.height()) + " and mask " +
                      std::to_string(instance_mask.width()) + "x" +
                      std::to_string(instance_mask.height()) + " differ in size (" + source_id + ")");
  }
  if (instance_mask.channels() != 1) throw IngestError("extract_cutouts: mask must be indexed");
  if (image.channels() != 3) throw IngestError("extract_cutouts: image must be RGB");

  struct Extent {
    int count = 0;
    int min_x = INT32_MAX, min_y = INT32_MAX, max_x = -1, max_y = -1;
  };
  std::array<Extent, 256> extents{};
  for (int y = 0; y < instance_mask.height(); ++y) {
    for (int x = 0; x < instance_mask.width(); ++x) {
      Extent& e = extents[instance_mask.at(x, y, 0)];
      ++e.count;
      e.min_x = std::min(e.min_x, x);
      e.min_y = std::min(e.min_y, y);
      e.max_x = std::max(e.max_x, x);
      e.max_y = std::max(e.max_y, y);
    }
  }

  ExtractResult result;
  for (const auto& annot : annotations) {
    const int index = annot.instance_index;
    if (index < 1 || index > 254 || extents[static_cast<std::size_t>(index)].count == 0) {
      result.warnings.push_back(source_id + ": instance " + std::to_string(index) + " (" +
                                annot.class_name + ") not present in mask, skipped");
      continue;
    }
    const Extent& e = extents[static_cast<std::size_t>(index)];
    const int w = e.max_x - e.min_x + 1;
    const int h = e.max_y - e.min_y + 1;
    SegmentedObject obj;
    obj.pixels = Image(w, h, 3);
    obj.alpha = Image(w, h, 1);
    obj.area_px = e.count;
    obj.class_name = annot.class_name;
    obj.source_id = source_id;
    obj.instance_index = index;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) obj.pixels.at(x, y, c) = image.at(e.min_x + x, e.min_y + y, c);
        obj.alpha.at(x, y, 0) = instance_mask.at(e.min_x + x, e.min_y + y, 0) == index ? 255 : 0;
      }
    }
    result.objects.push_back(std::move(obj));
  }
  return result;
}

void FilterRules::validate() const {
  if (min_area_px < 0) throw std::invalid_argument("FilterRules: min_area_px must be >= 0");
}

bool FilterRules::accepts(const SegmentedObject& object, const AnnotationObject& annotation) const {
  if (exclude_classes.contains(annotation.class_name)) return false;
  if (exclude_difficult && annotation.difficult) return false;
  if (exclude_truncated && annotation.truncated) return false;
  return object.area_px >= min_area_px;
}

std::vector<SegmentedObject> filter_objects(const std::vector<SegmentedObject>& objects,
                                            const std::vector<AnnotationObject>& annotations,
                                            const FilterRules& rules) {
  rules.validate();
  if (objects.size() != annotations.size()) {
    throw std::invalid_argument("filter_objects: " + std::to_string(objects.size()) +
                                " objects but " + std::to_string(annotations.size()) +
                                " annotations");
  }
  std::vector<SegmentedObject> kept;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (rules.accepts(objects[i], annotations[i])) kept.push_back(objects[i]);
  }
  return kept;
}

OccluderLibrary OccluderLibrary::from_objects(std::vector<SegmentedObject> objects) {
  std::stable_sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source_id, a.instance_index) < std::tie(b.source_id, b.instance_index);
  });
  OccluderLibrary lib;
  for (const auto& obj : objects) {
    lib.manifest.push_back({obj.id(), obj.class_name, obj.area_px, obj.source_id,
                            obj.pixels.width(), obj.pixels.height(), obj.instance_index});
  }
  lib.objects = std::move(objects);
  return lib;
}

namespace {

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read split list " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ImageItems {
  std::vector<SegmentedObject> objects;
  std::vector<AnnotationObject> annotations;  // aligned with objects
  std::size_t annotated = 0;
  std::vector<std::string> warnings;
};

ImageItems ingest_one(const std::filesystem::path& root, const std::string& id) {
  ImageItems items;
  std::vector<AnnotationObject> annots;
  try {
    annots = parse_annotation(read_file(root / "Annotations" / (id + ".xml")));
  } catch (const VocParseError& e) {
    throw VocParseError(id + ".xml: " + e.what());
  }
  items.annotated = annots.size();
  std::filesystem::path image_path = root / "JPEGImages" / (id + ".jpg");
  if (!std::filesystem::exists(image_path)) image_path = root / "JPEGImages" / (id + ".png");
  const Image image = read_color_image(image_path);
  const Image mask = read_png_indexed(root / "SegmentationObject" / (id + ".png"));
  ExtractResult extracted = extract_cutouts(image, mask, annots, id);
  items.warnings = std::move(extracted.warnings);
  for (auto& obj : extracted.objects) {
    items.annotations.push_back(annots[static_cast<std::size_t>(obj.instance_index - 1)]);
    items.objects.push_back(std::move(obj));
  }
  return items;
}

}  // namespace

BuildResult build_library(const BuildOptions& options) {
  options.rules.validate();
  const auto& root = options.dataset_root;
  for (const char* sub : {"Annotations", "JPEGImages", "SegmentationObject"}) {
    if (!std::filesystem::is_directory(root / sub)) {
      throw IngestError("missing directory " + (root / sub).string());
    }
  }

  const auto split_dir = root / "ImageSets" / "Segmentation";
  std::vector<std::string> ids;
  const auto split_file = split_dir / (options.split + ".txt");
  if (std::filesystem::exists(split_file)) {
    ids = read_id_list(split_file);
  } else {
    for (const auto& entry : std::filesystem::directory_iterator(root / "SegmentationObject")) {
      if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<ImageItems> per_image(ids.size());
  parallel_for(ids.size(), options.threads,
               [&](std::size_t i) { per_image[i] = ingest_one(root, ids[i]); });

  BuildResult result;
  result.images = ids.size();
  std::vector<SegmentedObject> objects;
  std::vector<AnnotationObject> annots;
  for (auto& items : per_image) {
    result.breakdown.annotated += items.annotated;
    result.warnings.insert(result.warnings.end(), items.warnings.begin(), items.warnings.end());
    for (std::size_t k = 0; k < items.objects.size(); ++k) {
      objects.push_back(std::move(items.objects[k]));
      annots.push_back(items.annotations[k]);
    }
  }
  result.breakdown.extracted = objects.size();
  result.breakdown.missing_mask = result.breakdown.annotated - objects.size();

  // Sequential per-rule counts for diagnostics.
  const FilterRules& r = options.rules;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const AnnotationObject& a = annots[i];
    if (r.exclude_classes.contains(a.class_name)) continue;
    ++result.breakdown.after_class;
    if (r.exclude_difficult && a.difficult) continue;
    ++result.breakdown.after_difficult;
    if (r.exclude_truncated && a.truncated) continue;
    ++result.breakdown.after_truncated;
    if (objects[i].area_px < r.min_area_px) continue;
    ++result.breakdown.after_area;
  }

  std::vector<SegmentedObject> kept = filter_objects(objects, annots, options.rules);
  if (kept.empty()) {
    throw IngestError("empty library: no objects survive the filter rules under " + root.string());
  }
  result.library = OccluderLibrary::from_objects(std::move(kept));

  if (std::filesystem::is_directory(split_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(split_dir)) {
      const std::string name = entry.path().stem().string();
      if (entry.path().extension() != ".txt" || name == options.split) continue;
      const auto subset_ids = read_id_list(entry.path());
      const std::set<std::string> subset(subset_ids.begin(), subset_ids.end());
      result.subset_counts[name] = static_cast<std::size_t>(
          std::count_if(result.library.manifest.begin(), result.library.manifest.end(),
                        [&](const ManifestEntry& m) { return subset.contains(m.source_id); }));
    }
  }

  if (!options.out_dir.empty()) write_library(options.out_dir, result.library);
  return result;
}

void write_library(const std::filesystem::path& dir, const OccluderLibrary& library) {
  std::filesystem::create_directories(dir / "cutouts");
  nlohmann::json manifest = nlohmann::json::array();
  for (std::size_t i = 0; i < library.size(); ++i) {
    const SegmentedObject& obj = library.objects[i];
    const ManifestEntry& m = library.manifest.at(i);
    Image rgba(obj.pixels.width(), obj.pixels.height(), 4);
    for (int y = 0; y < rgba.height(); ++y) {
      for (int x = 0; x < rgba.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgba.at(x, y, c) = obj.pixels.at(x, y, c);
        rgba.at(x, y, 3) = obj.alpha.at(x, y, 0);
      }
    }
    write_png(dir / "cutouts" / (m.id + ".png"), rgba);
    manifest.push_back({{"id", m.id},
                        {"class", m.class_name},
                        {"area_px", m.area_px},
                        {"source_id", m.source_id},
                        {"width", m.width},
                        {"height", m.height},
                        {"instance_index", m.instance_index}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IngestError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
}

OccluderLibrary load_library(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IntegrityError("missing manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("corrupt manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_array()) throw IntegrityError("manifest must be a JSON array");

  OccluderLibrary lib;
  for (const auto& item : manifest) {
    ManifestEntry m;
    try {
      m.id = item.at("id").get<std::string>();
      m.class_name = item.at("class").get<std::string>();
      m.area_px = item.at("area_px").get<int>();
      m.source_id = item.at("source_id").get<std::string>();
      m.width = item.at("width").get<int>();
      m.height = item.at("height").get<int>();
      m.instance_index = item.value("instance_index", 0);
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("corrupt manifest entry: " + std::string(e.what()));
    }
    if (m.instance_index == 0) {
      // Fall back to the numeric id suffix.
      const auto pos = m.id.rfind('_');
      if (pos != std::string::npos) m.instance_index = std::atoi(m.id.c_str() + pos + 1);
    }
    const auto file = dir / "cutouts" / (m.id + ".png");
    if (!std::filesystem::exists(file)) {
      throw IntegrityError("cutout file missing: " + file.string());
    }
    Image rgba;
    try {
      rgba = read_png(file);
    } catch (const ImageIoError& e) {
      throw IntegrityError("unreadable cutout " + file.string() + ": " + e.what());
    }
    if (rgba.channels() != 4 || rgba.width() != m.width || rgba.height() != m.height) {
      throw IntegrityError("cutout " + file.string() + " does not match manifest size/format");
    }
    SegmentedObject obj;
    obj.pixels = Image(rgba.width(), rgba.height(), 3);
    obj.alpha = Image(rgba.width(), rgba.height(), 1);
    for (int y = 0; y < rgba.height(); ++y) {
      for (int x = 0; x < rgba.width(); ++x) {
        for (int c = 0; c < 3; ++c) obj.pixels.at(x, y, c) = rgba.at(x, y, c);
        obj.alpha.at(x, y, 0) = rgba.at(x, y, 3);
      }
    }
    obj.area_px = m.area_px;
    obj.class_name = m.class_name;
    obj.source_id = m.source_id;
    obj.instance_index = m.instance_index;
    if (obj.id() != m.id) {
      throw IntegrityError("manifest id " + m.id + " does not match source_id/instance_index");
    }
    obj.validate();
    lib.objects.push_back(std::move(obj));
    lib.manifest.push_back(std::move(m));
  }
  return lib;
}

}  // namespace synocc
