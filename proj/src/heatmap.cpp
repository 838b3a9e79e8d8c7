#include "synocc/heatmap.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace synocc {

void BackboneOutput::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw ShapeError("BackboneOutput: dimensions must be positive");
  }
  if (spatial_logits.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("BackboneOutput: spatial_logits size does not match Hh*Wh*C");
  }
  if (depth_logits.empty()) throw ShapeError("BackboneOutput: depth_logits is empty");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(spatial_logits.begin(), spatial_logits.end(), finite) ||
      !std::all_of(depth_logits.begin(), depth_logits.end(), finite)) {
    throw ShapeError("BackboneOutput: non-finite logit");
  }
}

CoordinateGrid CoordinateGrid::make(const GridSpec& spec) {
  if (spec.heatmap_width <= 0 || spec.heatmap_height <= 0 || spec.depth_bins <= 0 ||
      spec.abs_depth_bins <= 0) {
    throw ShapeError("GridSpec: bin counts must be positive");
  }
  if (!(spec.rel_depth_half_range_mm > 0) || !(spec.abs_depth_range_mm > 0)) {
    throw ShapeError("GridSpec: depth ranges must be positive");
  }
  CoordinateGrid g;
  g.x.resize(static_cast<std::size_t>(spec.heatmap_width));
  g.y.resize(static_cast<std::size_t>(spec.heatmap_height));
  g.z.resize(static_cast<std::size_t>(spec.depth_bins));
  g.zstar.resize(static_cast<std::size_t>(spec.abs_depth_bins));
  for (int u = 0; u < spec.heatmap_width; ++u) {
    g.x[u] = (u + 0.5) * spec.crop_width / spec.heatmap_width;
  }
  for (int v = 0; v < spec.heatmap_height; ++v) {
    g.y[v] = (v + 0.5) * spec.crop_height / spec.heatmap_height;
  }
  const double span = 2.0 * spec.rel_depth_half_range_mm;
  for (int d = 0; d < spec.depth_bins; ++d) {
    g.z[d] = -spec.rel_depth_half_range_mm + (d + 0.5) * span / spec.depth_bins;
  }
  for (int d = 0; d < spec.abs_depth_bins; ++d) {
    g.zstar[d] = (d + 0.5) * spec.abs_depth_range_mm / spec.abs_depth_bins;
  }
  return g;
}

VolumetricHeatmapSet reshape_channels(const BackboneOutput& output, int joints, int depth) {
  if (joints <= 0 || depth <= 0) throw ShapeError("reshape_channels: J and D must be positive");
  if (output.channels != joints * depth) {
    throw ShapeError("reshape_channels: channel count " + std::to_string(output.channels) +
                     " is not J*D = " + std::to_string(joints * depth));
  }
  if (output.spatial_logits.size() !=
      static_cast<std::size_t>(output.height) * output.width * output.channels) {
    throw ShapeError("reshape_channels: spatial_logits size mismatch");
  }
  VolumetricHeatmapSet set;
  set.joints = joints;
  set.depth = depth;
  set.height = output.height;
  set.width = output.width;
  set.volumes.assign(static_cast<std::size_t>(joints), std::vector<double>(set.volume_size()));
  for (int v = 0; v < output.height; ++v) {
    for (int u = 0; u < output.width; ++u) {
      for (int k = 0; k < output.channels; ++k) {
        const int j = k / depth;
        const int d = k % depth;
        set.volumes[j][(static_cast<std::size_t>(d) * output.height + v) * output.width + u] =
            output.spatial_logits[output.spatial_index(v, u, k)];
      }
    }
  }
  return set;
}

template <std::floating_point T>
std::vector<T> softmax_volume(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("softmax_volume: empty input");
  const T peak = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T total = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - peak);
    total += p[k];
  }
  for (auto& value : p) value /= total;
  return p;
}

namespace {

void check_volume(std::size_t size, const CoordinateGrid& grid, const char* what) {
  const std::size_t expected =
      static_cast<std::size_t>(grid.depth()) * grid.height() * grid.width();
  if (size != expected) {
    throw ShapeError(std::string(what) + ": volume has " + std::to_string(size) +
                     " entries, grid expects " + std::to_string(expected));
  }
}

}  // namespace

template <std::floating_point T>
std::array<T, 3> soft_argmax3(std::span<const T> logits, const CoordinateGrid& grid) {
  check_volume(logits.size(), grid, "soft_argmax3");
  const std::vector<T> p = softmax_volume(logits);
  const int depth = grid.depth();
  const int height = grid.height();
  const int width = grid.width();
  T ex = 0, ey = 0, ez = 0;
  std::size_t k = 0;
  for (int d = 0; d < depth; ++d) {
    T slice = 0;
    for (int v = 0; v < height; ++v) {
      T row = 0;
      for (int u = 0; u < width; ++u, ++k) {
        ex += p[k] * static_cast<T>(grid.x[u]);
        row += p[k];
      }
      ey += row * static_cast<T>(grid.y[v]);
      slice += row;
    }
    ez += slice * static_cast<T>(grid.z[d]);
  }
  // Rounding can push an expectation a few ulps past the outermost cell center.
  auto hull = [](T value, const std::vector<double>& axis) {
    const auto [lo, hi] = std::minmax(axis.front(), axis.back());
    return std::clamp(value, static_cast<T>(lo), static_cast<T>(hi));
  };
  return {hull(ex, grid.x), hull(ey, grid.y), hull(ez, grid.z)};
}

template <std::floating_point T>
T soft_argmax1(std::span<const T> logits, std::span<const double> coords) {
  if (logits.size() != coords.size()) {
    throw ShapeError("soft_argmax1: " + std::to_string(logits.size()) + " logits for " +
                     std::to_string(coords.size()) + " coordinates");
  }
  const std::vector<T> p = softmax_volume(logits);
  T mean = 0;
  for (std::size_t k = 0; k < p.size(); ++k) mean += p[k] * static_cast<T>(coords[k]);
  const auto [lo, hi] = std::minmax_element(coords.begin(), coords.end());
  return std::clamp(mean, static_cast<T>(*lo), static_cast<T>(*hi));
}

template std::vector<float> softmax_volume<float>(std::span<const float>);
template std::vector<double> softmax_volume<double>(std::span<const double>);
template std::array<float, 3> soft_argmax3<float>(std::span<const float>, const CoordinateGrid&);
template std::array<double, 3> soft_argmax3<double>(std::span<const double>,
                                                    const CoordinateGrid&);
template float soft_argmax1<float>(std::span<const float>, std::span<const double>);
template double soft_argmax1<double>(std::span<const double>, std::span<const double>);

SoftArgmax3Jacobian soft_argmax3_grad(std::span<const double> logits, const CoordinateGrid& grid) {
  check_volume(logits.size(), grid, "soft_argmax3_grad");
  const std::vector<double> p = softmax_volume(logits);
  const auto mean = soft_argmax3(logits, grid);
  SoftArgmax3Jacobian jac;
  for (auto& row : jac.rows) row.resize(p.size());
  std::size_t k = 0;
  for (int d = 0; d < grid.depth(); ++d) {
    for (int v = 0; v < grid.height(); ++v) {
      for (int u = 0; u < grid.width(); ++u, ++k) {
        jac.rows[0][k] = p[k] * (grid.x[u] - mean[0]);
        jac.rows[1][k] = p[k] * (grid.y[v] - mean[1]);
        jac.rows[2][k] = p[k] * (grid.z[d] - mean[2]);
      }
    }
  }
  return jac;
}

std::vector<double> soft_argmax1_grad(std::span<const double> logits,
                                      std::span<const double> coords) {
  const double mean = soft_argmax1(logits, coords);
  std::vector<double> grad = softmax_volume(logits);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= coords[k] - mean;
  return grad;
}

DecodedPose decode(const BackboneOutput& output, int joints, int depth,
                   const CoordinateGrid& grid) {
  if (output.height != grid.height() || output.width != grid.width() || depth != grid.depth()) {
    throw ShapeError("decode: backbone output shape does not match the coordinate grid");
  }
  const VolumetricHeatmapSet set = reshape_channels(output, joints, depth);
  DecodedPose pose;
  pose.xy.reserve(static_cast<std::size_t>(joints));
  pose.dz.reserve(static_cast<std::size_t>(joints));
  for (const auto& volume : set.volumes) {
    const auto coords = soft_argmax3<double>(volume, grid);
    pose.xy.emplace_back(coords[0], coords[1]);
    pose.dz.push_back(coords[2]);
  }
  pose.zstar = soft_argmax1<double>(output.depth_logits, grid.zstar);
  return pose;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; add byte swapping for this platform");

template <typename T>
void read_values(std::istream& in, std::vector<double>& dst, std::size_t count,
                 const std::filesystem::path& path) {
  std::vector<T> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
    throw ShapeError("truncated tensor data in " + path.string());
  }
  dst.assign(raw.begin(), raw.end());
}

template <typename T>
void write_values(std::ostream& out, const std::vector<double>& src) {
  std::vector<T> raw(src.begin(), src.end());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(T)));
}

}  // namespace

BackboneOutput read_backbone_output(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open tensor file " + path.string());
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError("bad tensor header in " + path.string() + ": " + e.what());
  }
  const auto dims = header.at("dims").get<std::vector<int>>();
  const auto depth_dims = header.at("depth_dims").get<std::vector<int>>();
  const auto dtype = header.at("dtype").get<std::string>();
  const auto layout = header.value("layout", std::string("HWC"));
  if (dims.size() != 3 || depth_dims.size() != 1) {
    throw ShapeError("tensor header needs dims [Hh,Wh,C] and depth_dims [Dz]");
  }
  if (layout != "HWC") throw ShapeError("unsupported tensor layout " + layout);
  BackboneOutput out;
  out.height = dims[0];
  out.width = dims[1];
  out.channels = dims[2];
  if (out.height <= 0 || out.width <= 0 || out.channels <= 0 || depth_dims[0] <= 0) {
    throw ShapeError("tensor header has nonpositive dimension");
  }
  const std::size_t spatial = static_cast<std::size_t>(out.height) * out.width * out.channels;
  const auto depth = static_cast<std::size_t>(depth_dims[0]);
  if (dtype == "float32") {
    read_values<float>(in, out.spatial_logits, spatial, path);
    read_values<float>(in, out.depth_logits, depth, path);
  } else if (dtype == "float64") {
    read_values<double>(in, out.spatial_logits, spatial, path);
    read_values<double>(in, out.depth_logits, depth, path);
  } else {
    throw ShapeError("unsupported tensor dtype " + dtype);
  }
  out.validate();
  return out;
}

void write_backbone_output(const std::filesystem::path& path, const BackboneOutput& output,
                           TensorDType dtype) {
  output.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tensor file " + path.string());
  const nlohmann::json header = {
      {"dims", {output.height, output.width, output.channels}},
      {"depth_dims", {output.depth_logits.size()}},
      {"dtype", dtype == TensorDType::kFloat32 ? "float32" : "float64"},
      {"layout", "HWC"},
  };
  out << header.dump() << '\n';
  if (dtype == TensorDType::kFloat32) {
    write_values<float>(out, output.spatial_logits);
    write_values<float>(out, output.depth_logits);
  } else {
    write_values<double>(out, output.spatial_logits);
    write_values<double>(out, output.depth_logits);
  }
}

}  // namespace synocc
