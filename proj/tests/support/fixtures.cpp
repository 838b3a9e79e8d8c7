#include "fixtures.hpp"

#include "synocc/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace synocc::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const fs::path candidate =
        fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(attempt));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

struct FixtureObject {
  std::string name;
  bool difficult;
  bool truncated;
  int x0, y0, w, h;  // mask rectangle
  std::uint8_t r, g, b;
};

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string annotation_xml(const std::string& id, int width, int height,
                           const std::vector<FixtureObject>& objects) {
  std::ostringstream xml;
  xml << "<annotation>\n  <filename>" << id << ".jpg</filename>\n"
      << "  <size><width>" << width << "</width><height>" << height
      << "</height><depth>3</depth></size>\n  <segmented>1</segmented>\n";
  for (const auto& o : objects) {
    xml << "  <object>\n    <name>" << o.name << "</name>\n    <pose>Unspecified</pose>\n"
        << "    <truncated>" << (o.truncated ? 1 : 0) << "</truncated>\n"
        << "    <difficult>" << (o.difficult ? 1 : 0) << "</difficult>\n"
        << "    <bndbox><xmin>" << o.x0 + 1 << "</xmin><ymin>" << o.y0 + 1 << "</ymin><xmax>"
        << o.x0 + o.w << "</xmax><ymax>" << o.y0 + o.h << "</ymax></bndbox>\n  </object>\n";
  }
  xml << "</annotation>\n";
  return xml.str();
}

void write_voc_image(const fs::path& root, const std::string& id,
                     const std::vector<FixtureObject>& objects) {
  const int width = 96, height = 72;
  Image rgb(width, height, 3, 0);
  Image mask(width, height, 1, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      rgb.at(x, y, 0) = static_cast<std::uint8_t>(x * 2);
      rgb.at(x, y, 1) = static_cast<std::uint8_t>(y * 3);
      rgb.at(x, y, 2) = 90;
    }
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    for (int y = o.y0 - 1; y <= o.y0 + o.h; ++y) {
      for (int x = o.x0 - 1; x <= o.x0 + o.w; ++x) {
        const bool inside = x >= o.x0 && x < o.x0 + o.w && y >= o.y0 && y < o.y0 + o.h;
        mask.at(x, y, 0) = inside ? static_cast<std::uint8_t>(i + 1) : 255;
        if (inside) {
          rgb.at(x, y, 0) = o.r;
          rgb.at(x, y, 1) = o.g;
          rgb.at(x, y, 2) = o.b;
        }
      }
    }
  }
  fs::create_directories(root / "JPEGImages");
  fs::create_directories(root / "SegmentationObject");
  write_jpeg(root / "JPEGImages" / (id + ".jpg"), rgb);
  write_png_indexed(root / "SegmentationObject" / (id + ".png"), mask);
  write_text(root / "Annotations" / (id + ".xml"), annotation_xml(id, width, height, objects));
}

}  // namespace

VocFixtureCounts write_voc_fixture(const fs::path& root) {
  write_voc_image(root, "2008_000001",
                  {{"dog", false, false, 5, 5, 30, 20, 200, 40, 40},
                   {"person", false, false, 50, 10, 30, 25, 40, 200, 40}});
  write_voc_image(root, "2008_000002",
                  {{"car", true, false, 5, 5, 30, 30, 40, 40, 200},
                   {"sheep", false, true, 50, 30, 40, 30, 220, 220, 220}});
  write_voc_image(root, "2008_000003",
                  {{"bottle", false, false, 5, 5, 20, 20, 10, 120, 10},
                   {"cat", false, false, 40, 20, 25, 24, 250, 180, 0}});
  write_text(root / "ImageSets" / "Segmentation" / "trainval.txt",
             "2008_000001\n2008_000002\n2008_000003\n");
  write_text(root / "ImageSets" / "Segmentation" / "train.txt", "2008_000001\n2008_000002\n");
  write_text(root / "ImageSets" / "Segmentation" / "val.txt", "2008_000003\n");
  return {};
}

OccluderLibrary synthetic_library(int n, std::uint64_t seed) {
  std::vector<SegmentedObject> objects;
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::for_frame(seed, "occluder_" + std::to_string(i));
    const int w = static_cast<int>(rng.uniform_int(12, 60));
    const int h = static_cast<int>(rng.uniform_int(12, 60));
    SegmentedObject o;
    o.pixels = Image(w, h, 3, 0);
    o.alpha = Image(w, h, 1, 0);
    const std::uint8_t r = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const std::uint8_t g = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const std::uint8_t b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = (x + 0.5 - w / 2.0) / (w / 2.0);
        const double dy = (y + 0.5 - h / 2.0) / (h / 2.0);
        // Ellipse touching all four edges keeps the crop tight.
        const bool on_axis = x == w / 2 || y == h / 2;
        if (dx * dx + dy * dy <= 1.0 || on_axis) {
          o.alpha.at(x, y, 0) = 255;
          o.pixels.at(x, y, 0) = r;
          o.pixels.at(x, y, 1) = g;
          o.pixels.at(x, y, 2) = b;
          ++o.area_px;
        }
      }
    }
    o.class_name = "blob";
    o.source_id = "synthetic_" + std::to_string(i);
    o.instance_index = 1;
    objects.push_back(std::move(o));
  }
  return OccluderLibrary::from_objects(std::move(objects));
}

void write_frame_set(const fs::path& images_dir, const fs::path& boxes, int n, int width, int height,
                     const std::vector<int>& without_box) {
  fs::create_directories(images_dir);
  std::ostringstream jsonl;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d", i);
    Image img(width, height, 3);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        img.at(x, y, 0) = static_cast<std::uint8_t>((x + i * 7) % 256);
        img.at(x, y, 1) = static_cast<std::uint8_t>((y * 2) % 256);
        img.at(x, y, 2) = static_cast<std::uint8_t>((x + y + i) % 256);
      }
    }
    write_png(images_dir / (std::string(name) + ".png"), img);
    if (std::find(without_box.begin(), without_box.end(), i) != without_box.end()) continue;
    const double bw = width * 0.4, bh = height * 0.7;
    nlohmann::json box = {{"frame_id", name}, {"x", width * 0.3 + (i % 5)}, {"y", height * 0.1},
                          {"w", bw}, {"h", bh}, {"score", 0.9}};
    jsonl << box.dump() << '\n';
  }
  write_text(boxes, jsonl.str());
}

std::vector<std::string> diff_trees(const fs::path& a, const fs::path& b) {
  auto listing = [](const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).string());
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  std::vector<std::string> diffs;
  const auto fa = listing(a), fb = listing(b);
  if (fa != fb) diffs.push_back("file lists differ");
  for (const auto& f : fa) {
    if (!fs::exists(b / f)) continue;
    if (read_file(a / f) != read_file(b / f)) diffs.push_back(f);
  }
  return diffs;
}

Pose3D random_pose(int joints, std::uint64_t seed, int root_index) {
  Rng rng = Rng::for_frame(seed, "pose");
  Pose3D p;
  p.root_index = root_index;
  for (int j = 0; j < joints; ++j) {
    p.joints.emplace_back(rng.uniform(-900, 900), rng.uniform(-900, 900), rng.uniform(3000, 6000));
  }
  return p;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace synocc::testing
