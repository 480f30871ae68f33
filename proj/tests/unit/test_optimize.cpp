#include <cstring>

#include <gtest/gtest.h>

#include "codesign/optimize.hpp"
#include "support.hpp"

using namespace codesign;
using namespace codesign::optimize;

namespace {

/// sum_i a_i x_i^2 with its gradient.
Evaluator quadratic(std::vector<double> a) {
  return [a](const diffkit::ParamVector& p, bool with_gradient) {
    objectives::ObjectiveReport r;
    for (std::size_t i = 0; i < p.size(); ++i) r.value += a[i] * p.value(i) * p.value(i);
    r.terms["quadratic"] = r.value;
    if (with_gradient) {
      r.gradient = diffkit::Gradient::zeros(p);
      for (std::size_t i = 0; i < p.size(); ++i) r.gradient.values(static_cast<Eigen::Index>(i)) = 2.0 * a[i] * p.value(i);
    }
    return r;
  };
}

diffkit::ParamVector point(std::initializer_list<double> xs) {
  diffkit::ParamVector p;
  int i = 0;
  for (double x : xs) p.add("x" + std::to_string(i++), x, diffkit::Unit::dimensionless);
  return p;
}

}  // namespace

TEST(LrSchedule, HalvesEveryHalflife) {
  AdamConfig cfg;
  cfg.r_init = 0.003;
  EXPECT_EQ(lr_schedule(cfg, 0), 0.003);
  EXPECT_EQ(lr_schedule(cfg, 5000), 0.0015);
  EXPECT_EQ(lr_schedule(cfg, 10000), 0.00075);
  cfg.decay_halflife_steps = 0.0;
  EXPECT_EQ(lr_schedule(cfg, 123456), 0.003);
}

TEST(AdamConfig, Validation) {
  AdamConfig cfg;
  cfg.b1 = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = AdamConfig{};
  cfg.r_init = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Adam, MinimizesSquare) {
  AdamConfig cfg;
  cfg.r_init = 0.1;
  cfg.steps = 500;
  const auto r = adam_run(quadratic({1.0}), point({1.0}), cfg);
  EXPECT_LT(std::abs(r.params.value(0)), 1e-3);
  EXPECT_FALSE(r.trace.aborted);
  EXPECT_EQ(r.trace.records.size(), 501u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  AdamConfig cfg;
  cfg.steps = 50;
  const auto init = point({0.3, -2.0});
  const auto r = adam_run(quadratic({0.0, 0.0}), init, cfg);
  EXPECT_EQ(r.params.values(), init.values());
}

TEST(Adam, BitwiseDeterministic) {
  AdamConfig cfg;
  cfg.r_init = 0.05;
  cfg.steps = 200;
  const auto a = adam_run(quadratic({1.0, 3.0}), point({1.0, -0.5}), cfg);
  const auto b = adam_run(quadratic({1.0, 3.0}), point({1.0, -0.5}), cfg);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    EXPECT_EQ(std::memcmp(&a.trace.records[i].value, &b.trace.records[i].value, sizeof(double)), 0);
  }
  EXPECT_EQ(a.params.values(), b.params.values());
}

TEST(Adam, RecordedRatesFollowSchedule) {
  AdamConfig cfg;
  cfg.r_init = 0.02;
  cfg.decay_halflife_steps = 40;
  cfg.steps = 120;
  const auto r = adam_run(quadratic({1.0}), point({1.0}), cfg);
  for (const auto& rec : r.trace.records) {
    EXPECT_EQ(rec.lr, lr_schedule(cfg, rec.step));
  }
  for (std::size_t i = 1; i < r.trace.records.size(); ++i) {
    EXPECT_GT(r.trace.records[i].step, r.trace.records[i - 1].step);
  }
}

TEST(Adam, MonotoneAfterBurnInOnConvexQuadratics) {
  for (double r_init : {0.01, 0.05}) {
    AdamConfig cfg;
    cfg.r_init = r_init;
    cfg.steps = 300;
    const auto r = adam_run(quadratic({1.0, 4.0}), point({3.0, -2.0}), cfg);
    // Near the minimum Adam moves by about r per step and oscillates.
    const double floor = 5.0 * std::pow(20.0 * r_init, 2);
    for (std::size_t i = 51; i < r.trace.records.size(); ++i) {
      if (r.trace.records[i - 1].value < floor) break;
      EXPECT_LT(r.trace.records[i].value, r.trace.records[i - 1].value) << "r_init " << r_init << " step " << i;
    }
  }
}

TEST(Adam, SnapshotCadence) {
  AdamConfig cfg;
  cfg.steps = 250;
  cfg.snapshot_every = 100;
  const auto r = adam_run(quadratic({1.0}), point({1.0}), cfg);
  std::vector<long> steps;
  for (const auto& s : r.trace.snapshots) steps.push_back(s.step);
  EXPECT_EQ(steps, (std::vector<long>{0, 100, 200, 250}));
}

TEST(Adam, AbortsOnNonFiniteObjective) {
  AdamConfig cfg;
  cfg.r_init = 0.1;
  cfg.steps = 100;
  auto base = quadratic({1.0});
  int calls = 0;
  Evaluator eval = [&](const diffkit::ParamVector& p, bool g) {
    auto r = base(p, g);
    if (++calls == 6) r.value = std::numeric_limits<double>::quiet_NaN();
    return r;
  };
  const auto r = adam_run(eval, point({1.0}), cfg);
  EXPECT_TRUE(r.trace.aborted);
  EXPECT_FALSE(r.trace.error.empty());
  EXPECT_EQ(r.trace.records.size(), 5u);
  EXPECT_TRUE(std::isfinite(r.final_report.value));
}

TEST(Demo, SimultaneousReachesTarget) {
  const auto r = alternating_vs_simultaneous_demo(0.8, -0.3);
  EXPECT_LT(r.simultaneous_value, 1e-8);
  EXPECT_LE(r.simultaneous_evaluations, 200);
}

TEST(Demo, AlternatingSweepRatioMatchesExactCoordinateIteration) {
  const double x0 = 0.8;
  const double y0 = -0.3;
  const auto r = alternating_vs_simultaneous_demo(x0, y0, 30);
  // Independent iteration of the exact coordinate minima of 101 x^2 - 198 x y + 101 y^2.
  double x = x0;
  double y = y0;
  std::vector<double> ratios;
  for (int s = 0; s < 30; ++s) {
    const double before = 101 * x * x - 198 * x * y + 101 * y * y;
    x = 99.0 / 101.0 * y;
    y = 99.0 / 101.0 * x;
    ratios.push_back((101 * x * x - 198 * x * y + 101 * y * y) / before);
  }
  ASSERT_EQ(r.sweep_ratios.size(), ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) EXPECT_NEAR(r.sweep_ratios[i], ratios[i], 1e-9) << i;
  EXPECT_NEAR(r.predicted_sweep_ratio, std::pow(99.0 / 101.0, 4), 1e-15);
  // The first x-solve lands on the line x = 99 y / 101; from then on every sweep scales f alike.
  for (std::size_t i = 1; i < ratios.size(); ++i) EXPECT_NEAR(r.sweep_ratios[i], r.predicted_sweep_ratio, 1e-9);
  EXPECT_EQ(r.alternating_solves, 60);
}

TEST(Demo, SimultaneousWinsByTwoOrders) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = alternating_vs_simultaneous_demo(u(rng), u(rng));
    EXPECT_LT(r.simultaneous_value * 100.0, r.alternating_value);
  }
}

TEST(Demo, FirstStepsOnDiagonal) {
  const auto s = demo_first_steps(0.5, 0.5);
  EXPECT_LT(s.simultaneous[0], 0.0);
  EXPECT_NEAR(s.simultaneous[0], s.simultaneous[1], 1e-15);
  EXPECT_NE(s.alternating[0], s.alternating[1]);
  EXPECT_EQ(s.alternating[1], 0.0);
}

TEST(RobustnessScan, ZeroShiftEqualsObjectiveAndOrderIsKept) {
  const auto p = testing_support::iswap_normal();
  const objectives::IswapSettings s;
  const std::vector<double> deltas = {0.004, 0.0, -0.004};
  const auto serial = robustness_scan(p, deltas, s, 1);
  const auto parallel = robustness_scan(p, deltas, s, 3);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(serial[i].delta, deltas[i]);
    EXPECT_TRUE(serial[i].ok);
    EXPECT_EQ(serial[i].value, parallel[i].value);
  }
  EXPECT_EQ(serial[1].value, objectives::iswap_objective(p, s, false).value);
}

TEST(RobustnessScan, FailuresAreRecorded) {
  const auto p = testing_support::iswap_normal();
  const auto pts = robustness_scan(p, {-10.0}, objectives::IswapSettings{}, 1);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_FALSE(pts[0].ok);
  EXPECT_FALSE(pts[0].error.empty());
}
