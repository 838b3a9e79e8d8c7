#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace synocc {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). Entries far below the largest
/// magnitude of their Jacobian are compared on that absolute floor, where central
/// differences are dominated by roundoff.
double relative_error(double analytic, double numeric, double floor);

/// Central difference of a scalar function along one coordinate of x, step scaled to
/// max(1, |x_i|).
double central_difference(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x, std::size_t i, double step);

struct GradcheckOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double step = 1e-4;
  // Test hook: perturbs one analytic Jacobian entry so the check must fail.
  bool inject_bug = false;
  int threads = 1;
};

struct GradcheckSuite {
  std::string name;
  int trials = 0;
  double max_rel_error = 0.0;
  bool passed = true;
  nlohmann::json worst_case;  // inputs and values of the worst entry, for reproduction
};

struct GradcheckReport {
  std::vector<GradcheckSuite> suites;
  bool passed() const;
};

/// soft_argmax3 on 16^3 volumes, soft_argmax1 on 32 bins, back_project_grad, and the full
/// loss chain (logits and c) on small random instances away from L1 kinks.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace synocc
