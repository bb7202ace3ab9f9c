#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lsfs/optimizer.hpp"
#include "generators.hpp"
#include "oracles.hpp"

namespace lsfs {
namespace {

AccuracyProfile table1() { return testing::table1_accuracy(); }
const WorkFn& resnet_work() { return testing::resnet152_work(); }

// Knee 300 MHz, stationary EDP point at 499 MHz, range 268.8 MHz .. 1.51 GHz.
HardwareProfile cpu_like() {
  const double k = 300e6 / 0.6, ps = 0.8, fs = 499e6;
  return make_profile("cpu", 300e6, 0.6, 2 * ps * k * k / (fs * fs * fs), ps, 1.5, 268.8e6, 1.51e9);
}

// Whole range inside the constant-voltage zone, no static power.
HardwareProfile gpu_like() { return make_profile("gpu", 700e6, 0.7, 9e-9, 0.0, 29.5, 306e6, 624.75e6); }

ProblemSpec problem(HardwareProfile hw, double gamma, std::optional<double> d_max = std::nullopt) {
  ProblemSpec p;
  p.hardware = std::move(hw);
  p.accuracy = table1();
  p.work_fn = resnet_work();
  p.gamma = gamma;
  p.d_max_s = d_max;
  return p;
}

double one_step_variation(const ProblemSpec& p, const PlanResult& oracle, std::size_t f_steps) {
  return testing::one_step_edp_variation(p, oracle, f_steps);
}

void expect_feasible(const ProblemSpec& p, const PlanResult& r) {
  EXPECT_GE(accuracy_at(p.accuracy, r.ratio), p.gamma);
  if (p.d_max_s) {
    EXPECT_LE(r.eval.latency_s, *p.d_max_s);
  }
  EXPECT_GE(r.f_hz, p.hardware.f_min_hz);
  EXPECT_LE(r.f_hz, p.hardware.f_max_hz);
  EXPECT_GE(r.ratio, p.r_min);
  EXPECT_LE(r.ratio, 1.0);
  const auto e = evaluate(p.hardware, p.work_fn(r.ratio), r.f_hz);
  EXPECT_EQ(e.edp_js, r.eval.edp_js);
  EXPECT_EQ(r.eval.edp_js, r.eval.energy_j * r.eval.latency_s);
}

TEST(Solve, ReferenceAccuracyNeedsFullNetwork) {
  const auto p = problem(cpu_like(), 0.8764);
  const auto r = solve(p);
  EXPECT_EQ(r.ratio, 1.0);
  EXPECT_TRUE(r.binds(Constraint::accuracy));
  expect_feasible(p, r);
}

TEST(Solve, LooseAccuracyPicksStationaryPoint) {
  const auto p = problem(cpu_like(), 0.0);
  const auto r = solve(p);
  EXPECT_EQ(r.ratio, 0.1);
  EXPECT_NEAR(r.f_hz, edp_stationary_frequency(p.hardware), 1.0);
  EXPECT_NEAR(r.f_hz, 499e6, 1.0);
  EXPECT_TRUE(r.binds(Constraint::r_min));
  EXPECT_FALSE(r.binds(Constraint::accuracy));
  const auto bf = brute_force(p, 512);
  EXPECT_EQ(bf.ratio, 0.1);
  EXPECT_LE(r.eval.edp_js, bf.eval.edp_js);
  EXPECT_LE(bf.eval.edp_js - r.eval.edp_js, one_step_variation(p, bf, 512));
  EXPECT_LE(std::abs(bf.f_hz - r.f_hz), (p.hardware.f_max_hz - p.hardware.f_min_hz) / 511);
}

TEST(Solve, AccuracyInfeasible) {
  const auto p = problem(cpu_like(), 0.95);
  try {
    solve(p);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), Infeasibility::accuracy);
  }
  EXPECT_THROW(brute_force(p, 16), InfeasibleError);
}

TEST(Solve, LatencyInfeasible) {
  auto p = problem(cpu_like(), 0.0);
  const double fastest = latency(p.hardware, p.work_fn(0.1), p.hardware.f_max_hz);
  p.d_max_s = std::nextafter(fastest, 0.0);
  try {
    solve(p);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), Infeasibility::latency);
  }
  try {
    brute_force(p, 64);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.kind(), Infeasibility::latency);
  }
  p.d_max_s = fastest;
  const auto r = solve(p);
  EXPECT_EQ(r.f_hz, p.hardware.f_max_hz);
  EXPECT_TRUE(r.binds(Constraint::f_max));
}

TEST(Solve, LatencyBudgetRaisesFrequency) {
  auto p = problem(cpu_like(), 0.0);
  const double w = p.work_fn(0.1);
  p.d_max_s = latency(p.hardware, w, 900e6);
  const auto r = solve(p);
  EXPECT_TRUE(r.binds(Constraint::latency));
  EXPECT_LE(r.eval.latency_s, *p.d_max_s);
  EXPECT_NEAR(r.f_hz, 900e6, 1.0);
}

TEST(Solve, GpuRegimeRunsAtHighestFrequency) {
  const auto p = problem(gpu_like(), 0.8);
  const auto r = solve(p);
  EXPECT_EQ(r.ratio, 0.7);
  EXPECT_EQ(r.f_hz, p.hardware.f_max_hz);
}

TEST(Solve, RejectsMalformedProblems) {
  auto p = problem(cpu_like(), 1.5);
  EXPECT_THROW(solve(p), ArgumentError);
  p = problem(cpu_like(), 0.5);
  p.r_min = 0.3;
  EXPECT_THROW(solve(p), ArgumentError);  // r_min above the smallest grid ratio
  p = problem(cpu_like(), 0.5);
  p.r_grid = {0.05, 1.0};
  p.r_min = 0.05;
  EXPECT_THROW(solve(p), ArgumentError);  // below tabulated accuracy
  p = problem(cpu_like(), 0.5, -1.0);
  EXPECT_THROW(solve(p), ArgumentError);
}

TEST(Solve, RestrictedGridHonoursRmin) {
  auto p = problem(cpu_like(), 0.0);
  p.r_grid = {0.5, 0.7, 1.0};
  p.r_min = 0.5;
  const auto r = solve(p);
  EXPECT_EQ(r.ratio, 0.5);
  EXPECT_TRUE(r.binds(Constraint::r_min));
}

TEST(Solve, ContinuousRatio) {
  auto p = problem(cpu_like(), 0.79525);
  p.continuous_r = true;
  const auto r = solve(p);
  EXPECT_NEAR(r.ratio, 0.6, 1e-9);
  EXPECT_GE(r.accuracy, 0.79525);
  EXPECT_TRUE(r.binds(Constraint::accuracy));
  p.continuous_r = false;
  EXPECT_EQ(solve(p).ratio, 0.7);
}

TEST(BruteForce, DegenerateSinglePoint) {
  auto p = problem(make_profile("one", 500e6, 0.8, 1e-9, 0.1, 2.0, 400e6, 400e6), 0.0);
  p.r_grid = {1.0};
  p.r_min = 1.0;
  const auto r = brute_force(p, 2);
  EXPECT_EQ(r.ratio, 1.0);
  EXPECT_EQ(r.f_hz, 400e6);
  EXPECT_EQ(solve(p).f_hz, 400e6);
  p.d_max_s = latency(p.hardware, p.work_fn(1.0), 400e6) * 0.5;
  EXPECT_THROW(brute_force(p, 2), InfeasibleError);
  EXPECT_THROW(frequency_grid(p.hardware, 1), ArgumentError);
}

TEST(OracleEquivalence, RandomFeasibleProblems) {
  std::mt19937_64 rng(99);
  constexpr std::size_t kSteps = 512;
  int checked = 0;
  while (checked < 150) {
    const auto p = testing::random_feasible_problem(rng, kSteps);
    const auto s = solve(p);
    const auto b = brute_force(p, kSteps);
    SCOPED_TRACE("problem " + std::to_string(checked));
    expect_feasible(p, s);
    expect_feasible(p, b);
    EXPECT_EQ(s.ratio, b.ratio);
    EXPECT_LE(s.eval.edp_js, b.eval.edp_js * (1 + 1e-12));
    EXPECT_LE(std::abs(s.eval.edp_js - b.eval.edp_js), one_step_variation(p, b, kSteps) + 1e-15 * b.eval.edp_js);
    ++checked;
  }
}

TEST(StageSeparability, AccuracyProfileOnlyMovesRatio) {
  auto p = problem(cpu_like(), 0.8);
  const auto a = solve(p);
  // Different accuracy values, same feasible ratio set for gamma = 0.8.
  p.accuracy = AccuracyProfile({{0.1, 0.2}, {0.3, 0.3}, {0.5, 0.4}, {0.7, 0.85}, {0.8, 0.9}, {0.9, 0.91}, {1.0, 0.95}});
  const auto b = solve(p);
  EXPECT_EQ(a.ratio, b.ratio);
  EXPECT_EQ(a.f_hz, b.f_hz);
  EXPECT_EQ(a.eval.edp_js, b.eval.edp_js);
}

TEST(MonotoneWork, LowerRatioNeverRaisesEdp) {
  const auto hw = cpu_like();
  for (double f : {300e6, 499e6, 1e9, 1.5e9}) {
    double prev = 0;
    for (double r : default_ratio_grid()) {
      const double e = edp(hw, resnet_work()(r), f);
      EXPECT_GE(e, prev);
      prev = e;
    }
  }
}

TEST(Sweep, OrderAndShape) {
  const auto p = problem(cpu_like(), 0.0);
  const auto rows = sweep(p, 5);
  ASSERT_EQ(rows.size(), 7u * 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ratio == rows[i - 1].ratio)
      EXPECT_GT(rows[i].f_hz, rows[i - 1].f_hz);
    else
      EXPECT_GT(rows[i].ratio, rows[i - 1].ratio);
  }
  EXPECT_EQ(rows.front().f_hz, p.hardware.f_min_hz);
  EXPECT_EQ(rows.back().f_hz, p.hardware.f_max_hz);
  EXPECT_THROW(sweep(p, 1), ArgumentError);
}

TEST(Sweep, ParallelMatchesSerial) {
  const auto p = problem(cpu_like(), 0.0);
  std::ostringstream a, b;
  write_sweep_csv(a, sweep(p, 64, 1));
  write_sweep_csv(b, sweep(p, 64, 7));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "ratio,f_hz,latency_s,energy_j,edp_js,accuracy");
}

TEST(Sweep, ConstantVoltageEnergyIsFlat) {
  const auto p = problem(gpu_like(), 0.0);
  const auto rows = sweep(p, 40);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].ratio == rows[i - 1].ratio) {
      EXPECT_NEAR(rows[i].energy_j, rows[i - 1].energy_j, 1e-12 * rows[i].energy_j);
    }
}

TEST(Sweep, FixedFrequencyPointsAreCollinearThroughOrigin) {
  const auto p = problem(cpu_like(), 0.0);
  const std::size_t steps = 9;
  const auto rows = sweep(p, steps);
  const std::size_t nr = rows.size() / steps;
  for (std::size_t fi = 0; fi < steps; ++fi) {
    const auto& ref = rows[(nr - 1) * steps + fi];
    const double slope = ref.energy_j / ref.latency_s;
    for (std::size_t ri = 0; ri < nr; ++ri) {
      const auto& row = rows[ri * steps + fi];
      EXPECT_LT(std::abs(row.energy_j - slope * row.latency_s) / row.energy_j, 1e-9);
    }
  }
}

TEST(Sweep, CpuEdpMinimumNear499MHz) {
  const auto p = problem(cpu_like(), 0.0);
  const std::size_t steps = 256;
  const auto rows = sweep(p, steps);
  const double step = (p.hardware.f_max_hz - p.hardware.f_min_hz) / (steps - 1);
  const std::size_t full = rows.size() / steps - 1;
  std::size_t best = full * steps;
  for (std::size_t i = full * steps; i < (full + 1) * steps; ++i)
    if (rows[i].edp_js < rows[best].edp_js) best = i;
  EXPECT_EQ(rows[best].ratio, 1.0);
  EXPECT_LE(std::abs(rows[best].f_hz - 499e6), step);
}

}  // namespace
}  // namespace lsfs
