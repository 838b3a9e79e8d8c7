#include "synocc/gradcheck.hpp"

#include "synocc/camera.hpp"
#include "synocc/heatmap.hpp"
#include "synocc/parallel.hpp"
#include "synocc/rng.hpp"
#include "synocc/training.hpp"

#include <algorithm>
#include <cmath>

namespace synocc {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor, 1e-300});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x, std::size_t i, double step) {
  const double h = step * std::max(1.0, std::abs(x[i]));
  const double center = x[i];
  x[i] = center + h;
  const double up = f(x);
  x[i] = center - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

bool GradcheckReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.passed; });
}

namespace {

constexpr double kFloorFraction = 1e-3;

struct TrialWorst {
  double error = 0.0;
  nlohmann::json detail;
};

// Compares analytic vs numeric entries of one Jacobian row; `floor` is set from the row's
// largest analytic magnitude.
void compare(std::span<const double> analytic, std::span<const double> numeric,
             double row_scale, const nlohmann::json& context, TrialWorst& worst) {
  const double floor = kFloorFraction * row_scale;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = relative_error(analytic[i], numeric[i], floor);
    if (err > worst.error || worst.detail.is_null()) {
      worst.error = err;
      worst.detail = context;
      worst.detail["entry"] = i;
      worst.detail["analytic"] = analytic[i];
      worst.detail["numeric"] = numeric[i];
    }
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

TrialWorst soft_argmax3_trial(const GradcheckOptions& opt, int trial) {
  GridSpec spec;  // 16 x 16 x 16 over a 256 crop
  const CoordinateGrid grid = CoordinateGrid::make(spec);
  Rng rng = Rng::for_frame(opt.seed, "soft_argmax3:" + std::to_string(trial));
  const double sigma = rng.uniform(0.5, 3.0);
  std::vector<double> logits(static_cast<std::size_t>(16 * 16 * 16));
  for (auto& v : logits) v = sigma * rng.normal();

  SoftArgmax3Jacobian jac = soft_argmax3_grad(logits, grid);
  const std::size_t peak = static_cast<std::size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  if (opt.inject_bug && trial == 0) jac.rows[0][peak] += 0.01 * max_abs(jac.rows[0]);

  // Checking every entry costs 2 * 4096 forward passes per trial; a random subset plus the
  // peak cell keeps the suite fast.
  std::vector<std::size_t> entries{peak};
  for (int i = 0; i < 127; ++i) {
    entries.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(logits.size()) - 1)));
  }

  TrialWorst worst;
  for (int row = 0; row < 3; ++row) {
    auto f = [&](std::span<const double> x) { return soft_argmax3<double>(x, grid)[static_cast<std::size_t>(row)]; };
    std::vector<double> analytic, numeric;
    for (std::size_t k : entries) {
      analytic.push_back(jac.rows[static_cast<std::size_t>(row)][k]);
      numeric.push_back(central_difference(f, logits, k, opt.step));
    }
    nlohmann::json ctx = {{"suite", "soft_argmax3"}, {"trial", trial}, {"output", row},
                          {"logit_index", entries}, {"seed", opt.seed}, {"logits", logits}};
    TrialWorst row_worst;
    compare(analytic, numeric, max_abs(jac.rows[static_cast<std::size_t>(row)]), ctx, row_worst);
    if (row_worst.error >= worst.error) {
      worst = row_worst;
      worst.detail["logit_index"] = entries[worst.detail["entry"].get<std::size_t>()];
    }
  }
  return worst;
}

TrialWorst soft_argmax1_trial(const GradcheckOptions& opt, int trial) {
  const CoordinateGrid grid = CoordinateGrid::make(GridSpec{});
  Rng rng = Rng::for_frame(opt.seed, "soft_argmax1:" + std::to_string(trial));
  const double sigma = rng.uniform(0.5, 3.0);
  std::vector<double> logits(grid.zstar.size());
  for (auto& v : logits) v = sigma * rng.normal();
  std::vector<double> analytic = soft_argmax1_grad(logits, grid.zstar);
  auto f = [&](std::span<const double> x) { return soft_argmax1<double>(x, grid.zstar); };
  std::vector<double> numeric;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    numeric.push_back(central_difference(f, logits, k, opt.step));
  }
  TrialWorst worst;
  compare(analytic, numeric, max_abs(analytic),
          {{"suite", "soft_argmax1"}, {"trial", trial}, {"seed", opt.seed}, {"logits", logits}}, worst);
  return worst;
}

TrialWorst back_project_trial(const GradcheckOptions& opt, int trial) {
  Rng rng = Rng::for_frame(opt.seed, "back_project:" + std::to_string(trial));
  // inputs: x, y, dZ, Zstar, c
  std::vector<double> in = {rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(-1000, 1000),
                            rng.uniform(1500, 9000), rng.uniform(0.8, 1.25)};
  const double focal = rng.uniform(500, 2500);
  const double scale = rng.uniform(0.2, 2.0);
  auto camera = [&](double c) { return CropCamera{focal, scale, c, 256.0, 256.0}; };

  BackProjectJacobian jac = back_project_grad(in[0], in[1], in[2], in[3], camera(in[4]));
  if (opt.inject_bug && trial == 0) jac(0, kGradC) *= 1.01;
  TrialWorst worst;
  for (int row = 0; row < 3; ++row) {
    auto f = [&](std::span<const double> x) {
      return back_project(x[0], x[1], x[2], x[3], camera(x[4]))(row);
    };
    std::vector<double> analytic, numeric;
    for (std::size_t k = 0; k < in.size(); ++k) {
      analytic.push_back(jac(row, static_cast<int>(k)));
      numeric.push_back(central_difference(f, in, k, opt.step));
    }
    nlohmann::json ctx = {{"suite", "back_project"}, {"trial", trial}, {"output", row},
                          {"inputs", in}, {"focal", focal}, {"scale", scale}};
    TrialWorst row_worst;
    compare(analytic, numeric, max_abs(analytic), ctx, row_worst);
    if (row_worst.error >= worst.error) worst = row_worst;
  }
  return worst;
}

TrialWorst full_chain_trial(const GradcheckOptions& opt, int trial) {
  Rng rng = Rng::for_frame(opt.seed, "full_backward:" + std::to_string(trial));
  GridSpec spec;
  spec.heatmap_width = 5;
  spec.heatmap_height = 5;
  spec.depth_bins = 4;
  spec.abs_depth_bins = 8;
  const CoordinateGrid grid = CoordinateGrid::make(spec);
  const HeadShape shape{3, spec.depth_bins};
  const LossSpace space = trial % 2 == 0 ? LossSpace::kRootRelative : LossSpace::kAbsolute;

  BackboneOutput out;
  out.height = spec.heatmap_height;
  out.width = spec.heatmap_width;
  out.channels = shape.joints * shape.depth;
  out.spatial_logits.resize(static_cast<std::size_t>(out.height * out.width * out.channels));
  for (auto& v : out.spatial_logits) v = rng.normal();
  out.depth_logits.resize(grid.zstar.size());
  for (auto& v : out.depth_logits) v = rng.normal();
  const double c = rng.uniform(0.9, 1.1);
  const FrameGeometry geometry{1500.0, rng.uniform(0.3, 1.0), 256.0, 256.0};

  // Ground truth at least 5 mm from the prediction in every (root-relative) coordinate, so
  // finite-difference steps never cross an L1 kink.
  Pose3D gt = predict_pose(out, c, geometry, grid, shape, 0);
  for (int j = 0; j < gt.size(); ++j) {
    for (int a = 0; a < 3; ++a) {
      const double offset = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(5.0, 50.0);
      gt.joints[static_cast<std::size_t>(j)](a) += (space == LossSpace::kRootRelative && j == 0) ? 0.0 : offset;
    }
  }

  BackwardResult analytic_result = full_backward(out, c, gt, geometry, grid, shape, space);
  std::vector<double> analytic = analytic_result.grad_spatial;
  analytic.insert(analytic.end(), analytic_result.grad_depth.begin(), analytic_result.grad_depth.end());
  analytic.push_back(analytic_result.grad_c);
  if (opt.inject_bug && trial == 0) analytic.front() += 0.01 * max_abs(analytic);

  std::vector<double> params = out.spatial_logits;
  params.insert(params.end(), out.depth_logits.begin(), out.depth_logits.end());
  params.push_back(c);
  const std::size_t n_spatial = out.spatial_logits.size();
  auto loss = [&](std::span<const double> x) {
    BackboneOutput o = out;
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_spatial), o.spatial_logits.begin());
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(n_spatial), x.end() - 1, o.depth_logits.begin());
    const Pose3D pred = predict_pose(o, x.back(), geometry, grid, shape, 0);
    return l1_loss(pred, gt, space).value;
  };
  std::vector<double> numeric;
  for (std::size_t k = 0; k < params.size(); ++k) {
    numeric.push_back(central_difference(loss, params, k, opt.step));
  }
  TrialWorst worst;
  compare(analytic, numeric, max_abs(analytic),
          {{"suite", "full_backward"}, {"trial", trial}, {"seed", opt.seed},
           {"loss_space", to_string(space)}, {"params", params}},
          worst);
  return worst;
}

GradcheckSuite run_suite(const std::string& name, const GradcheckOptions& opt,
                         TrialWorst (*trial_fn)(const GradcheckOptions&, int)) {
  std::vector<TrialWorst> results(static_cast<std::size_t>(opt.trials));
  parallel_for(results.size(), opt.threads,
               [&](std::size_t i) { results[i] = trial_fn(opt, static_cast<int>(i)); });
  GradcheckSuite suite;
  suite.name = name;
  suite.trials = opt.trials;
  for (const auto& r : results) {
    if (r.error >= suite.max_rel_error) {
      suite.max_rel_error = r.error;
      suite.worst_case = r.detail;
    }
  }
  suite.passed = suite.max_rel_error < opt.tolerance;
  return suite;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("gradcheck: trials must be at least 1");
  GradcheckReport report;
  report.suites.push_back(run_suite("soft_argmax3", options, soft_argmax3_trial));
  report.suites.push_back(run_suite("soft_argmax1", options, soft_argmax1_trial));
  report.suites.push_back(run_suite("back_project", options, back_project_trial));
  report.suites.push_back(run_suite("full_backward", options, full_chain_trial));
  return report;
}

}  // namespace synocc
