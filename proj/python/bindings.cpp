#include "synocc/camera.hpp"
#include "synocc/cli.hpp"
#include "synocc/gradcheck.hpp"
#include "synocc/heatmap.hpp"
#include "synocc/metrics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace synocc;

namespace {

using PoseArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

Pose3D to_pose(const PoseArray& joints, int root_index) {
  Pose3D p;
  p.root_index = root_index;
  for (Eigen::Index j = 0; j < joints.rows(); ++j) p.joints.emplace_back(joints.row(j).transpose());
  p.validate();
  return p;
}

PoseArray from_pose(const Pose3D& pose) {
  PoseArray out(pose.size(), 3);
  for (int j = 0; j < pose.size(); ++j) out.row(j) = pose.joints[static_cast<std::size_t>(j)].transpose();
  return out;
}

std::vector<double> flat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_synocc, m) {
  m.doc() = "Occlusion augmentation, volumetric heatmap decoding and pose metrics.";

  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<>())
      .def_readwrite("crop_width", &GridSpec::crop_width)
      .def_readwrite("crop_height", &GridSpec::crop_height)
      .def_readwrite("heatmap_width", &GridSpec::heatmap_width)
      .def_readwrite("heatmap_height", &GridSpec::heatmap_height)
      .def_readwrite("depth_bins", &GridSpec::depth_bins)
      .def_readwrite("rel_depth_half_range_mm", &GridSpec::rel_depth_half_range_mm)
      .def_readwrite("abs_depth_bins", &GridSpec::abs_depth_bins)
      .def_readwrite("abs_depth_range_mm", &GridSpec::abs_depth_range_mm);

  m.def("grid_axes", [](const GridSpec& spec) {
        const CoordinateGrid g = CoordinateGrid::make(spec);
        py::dict d;
        d["x"] = g.x;
        d["y"] = g.y;
        d["z"] = g.z;
        d["zstar"] = g.zstar;
        return d;
      }, py::arg("spec") = GridSpec{}, "Cell-center coordinates of every heatmap axis.");

  m.def("soft_argmax3", [](py::array_t<double, py::array::c_style | py::array::forcecast> volume,
                           const GridSpec& spec) {
        const CoordinateGrid grid = CoordinateGrid::make(spec);
        if (volume.ndim() != 3 || volume.shape(0) != grid.depth() || volume.shape(1) != grid.height() ||
            volume.shape(2) != grid.width()) {
          throw py::value_error("volume must have shape (depth_bins, heatmap_height, heatmap_width)");
        }
        const auto r = soft_argmax3<double>(flat(volume), grid);
        return py::make_tuple(r[0], r[1], r[2]);
      }, py::arg("volume"), py::arg("spec") = GridSpec{});

  m.def("soft_argmax1", [](py::array_t<double, py::array::c_style | py::array::forcecast> logits,
                           const std::vector<double>& coords) {
        if (static_cast<std::size_t>(logits.size()) != coords.size()) {
          throw py::value_error("logits and coords differ in length");
        }
        return soft_argmax1<double>(flat(logits), coords);
      }, py::arg("logits"), py::arg("coords"));

  m.def("back_project", [](double x, double y, double dz, double zstar, double f, double s, double c,
                           double width, double height) {
        return Eigen::Vector3d(back_project(x, y, dz, zstar, CropCamera{f, s, c, width, height}));
      }, py::arg("x"), py::arg("y"), py::arg("dz"), py::arg("zstar"), py::arg("f") = 1500.0,
        py::arg("s") = 1.0, py::arg("c") = 1.0, py::arg("width") = 256.0, py::arg("height") = 256.0);

  m.def("project", [](const Eigen::Vector3d& p, double effective_focal, double width, double height) {
        return Eigen::Vector2d(project(p, effective_focal, width, height));
      }, py::arg("point"), py::arg("effective_focal"), py::arg("width") = 256.0, py::arg("height") = 256.0);

  m.def("mpjpe", [](const PoseArray& pred, const PoseArray& gt, int root_index) {
        return mpjpe(to_pose(pred, root_index), to_pose(gt, root_index));
      }, py::arg("pred"), py::arg("gt"), py::arg("root_index") = 0);

  m.def("flip_pose", [](const PoseArray& pose, int root_index) {
        const JointFlipMap map = pose.rows() == 17 ? JointFlipMap::h36m17()
                                                   : JointFlipMap::identity(static_cast<int>(pose.rows()), root_index);
        return from_pose(flip_pose(to_pose(pose, root_index), map));
      }, py::arg("pose"), py::arg("root_index") = 0,
        "Mirror a pose; 17-joint poses use the Human3.6M left/right pairing.");

  m.def("ensemble_average", [](const std::vector<PoseArray>& preds, int root_index) {
        std::vector<Pose3D> poses;
        for (const auto& p : preds) poses.push_back(to_pose(p, root_index));
        return from_pose(ensemble_average(poses));
      }, py::arg("preds"), py::arg("root_index") = 0);

  m.def("run_gradcheck", [](int trials, std::uint64_t seed, int threads) {
        GradcheckOptions opt;
        opt.trials = trials;
        opt.seed = seed;
        opt.threads = threads;
        GradcheckReport report;
        {
          py::gil_scoped_release release;
          report = run_gradcheck(opt);
        }
        py::dict out;
        for (const auto& s : report.suites) out[py::str(s.name)] = s.max_rel_error;
        return out;
      }, py::arg("trials") = 100, py::arg("seed") = 0, py::arg("threads") = 1,
        "Max relative error per gradient suite.");

  m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      }, py::arg("args"), "Run a synocc subcommand; returns (exit_code, stdout, stderr).");
}
