#include "synocc/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace synocc {
namespace {

TEST(Gradcheck, RelativeErrorUsesFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.001, 0.0), (1.001 - 1.0) / 1.001);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 2e-9, 1e-3), 1e-9 / 1e-3);
  EXPECT_EQ(relative_error(0.0, 0.0, 0.0), 0.0);
}

TEST(Gradcheck, CentralDifferenceOfCubic) {
  const auto f = [](std::span<const double> x) { return x[0] * x[0] * x[0] + 2 * x[1]; };
  EXPECT_NEAR(central_difference(f, {2.0, 5.0}, 0, 1e-5), 12.0, 1e-8);
  EXPECT_NEAR(central_difference(f, {2.0, 5.0}, 1, 1e-5), 2.0, 1e-8);
}

TEST(Gradcheck, AllSuitesPassOnSmallRun) {
  GradcheckOptions o;
  o.trials = 10;
  o.seed = 3;
  const auto r = run_gradcheck(o);
  ASSERT_EQ(r.suites.size(), 4u);
  for (const auto& s : r.suites) {
    EXPECT_TRUE(s.passed) << s.name << " " << s.max_rel_error;
    EXPECT_EQ(s.trials, 10);
  }
  EXPECT_TRUE(r.passed());
}

TEST(Gradcheck, InjectedBugIsCaught) {
  GradcheckOptions o;
  o.trials = 3;
  o.inject_bug = true;
  const auto r = run_gradcheck(o);
  EXPECT_FALSE(r.passed());
  for (const auto& s : r.suites) {
    if (!s.passed) {
      EXPECT_TRUE(s.worst_case.contains("trial"));
    }
  }
}

TEST(Gradcheck, ThreadCountDoesNotChangeReport) {
  GradcheckOptions a;
  a.trials = 6;
  GradcheckOptions b = a;
  b.threads = 3;
  const auto ra = run_gradcheck(a), rb = run_gradcheck(b);
  for (std::size_t i = 0; i < ra.suites.size(); ++i) {
    EXPECT_EQ(ra.suites[i].max_rel_error, rb.suites[i].max_rel_error);
  }
}

TEST(Gradcheck, ZeroTrialsRejected) {
  GradcheckOptions o;
  o.trials = 0;
  EXPECT_THROW(run_gradcheck(o), std::invalid_argument);
}

}  // namespace
}  // namespace synocc
