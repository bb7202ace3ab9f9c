#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lsfs/optimizer.hpp"
#include "lsfs/profiles.hpp"
#include "generators.hpp"
#include "oracles.hpp"

namespace lsfs {
namespace {

const char* kTable1Csv =
    "ratio,accuracy\n"
    "1.0,87.64\n0.9,86.16\n0.8,83.96\n0.7,81.18\n0.5,77.87\n0.3,69.05\n0.1,55.65\n";

AccuracyProfile table1() {
  std::istringstream in(kTable1Csv);
  return load_accuracy_csv(in, "table1");
}

TEST(AccuracyAt, ExactAtKnots) {
  const auto a = table1();
  const std::pair<double, double> knots[] = {{1.0, 0.8764}, {0.9, 0.8616}, {0.8, 0.8396}, {0.7, 0.8118},
                                             {0.5, 0.7787}, {0.3, 0.6905}, {0.1, 0.5565}};
  for (auto [r, acc] : knots) EXPECT_DOUBLE_EQ(accuracy_at(a, r), acc) << r;
  EXPECT_DOUBLE_EQ(a.reference_accuracy(), 0.8764);
}

TEST(AccuracyAt, InterpolatesLinearly) {
  const auto a = table1();
  EXPECT_NEAR(accuracy_at(a, 0.6), 0.79525, 1e-12);
  EXPECT_NEAR(accuracy_at(a, 0.2), (0.5565 + 0.6905) / 2, 1e-12);
}

TEST(AccuracyAt, NoExtrapolation) {
  const auto a = table1();
  EXPECT_THROW(accuracy_at(a, 0.05), DomainError);
  EXPECT_THROW(accuracy_at(a, 1.01), DomainError);
  EXPECT_THROW(accuracy_loss_at(a, 0.0999), DomainError);
}

TEST(AccuracyLoss, Values) {
  const auto a = table1();
  EXPECT_EQ(accuracy_loss_at(a, 1.0), 0.0);
  EXPECT_NEAR(accuracy_loss_at(a, 0.3), 0.1859, 1e-12);
}

TEST(AccuracyLoss, SumsToReferenceOverDomain) {
  const auto a = table1();
  for (int i = 0; i <= 900; ++i) {
    const double r = 0.1 + i * 0.001;
    if (r > 1.0) break;
    EXPECT_NEAR(accuracy_at(a, r) + accuracy_loss_at(a, r), a.reference_accuracy(), 1e-15);
  }
}

TEST(AccuracyProfileLoad, FractionAndPercentAgree) {
  std::istringstream frac("ratio,accuracy\n0.5,0.7787\n1.0,0.8764\n");
  const auto a = load_accuracy_csv(frac, "frac");
  EXPECT_DOUBLE_EQ(accuracy_at(a, 0.5), 0.7787);
  std::istringstream pct("ratio,accuracy\n0.5,77.87\n1.0,87.64\n");
  EXPECT_NEAR(accuracy_at(load_accuracy_csv(pct, "pct"), 0.5), 0.7787, 1e-15);
}

TEST(AccuracyProfileLoad, RejectsBadData) {
  std::istringstream nonmono("ratio,accuracy\n0.5,0.9\n1.0,0.8\n");
  EXPECT_THROW(load_accuracy_csv(nonmono, "x"), ParseError);
  std::istringstream no_one("ratio,accuracy\n0.5,0.7\n0.9,0.8\n");
  EXPECT_THROW(load_accuracy_csv(no_one, "x"), ParseError);
  std::istringstream dup("ratio,accuracy\n0.5,0.7\n0.5,0.7\n1.0,0.8\n");
  EXPECT_THROW(load_accuracy_csv(dup, "x"), ParseError);
  std::istringstream garbage("ratio,accuracy\n0.5,abc\n1.0,0.8\n");
  try {
    load_accuracy_csv(garbage, "acc.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("acc.csv:2"), std::string::npos);
  }
  std::istringstream header("r,a\n0.5,0.7\n");
  EXPECT_THROW(load_accuracy_csv(header, "x"), ParseError);
}

TEST(SmallestRatioMeeting, InvertsInterpolation) {
  const auto a = table1();
  EXPECT_EQ(*smallest_ratio_meeting(a, 0.0), 0.1);
  EXPECT_EQ(*smallest_ratio_meeting(a, 0.8764), 1.0);
  EXPECT_FALSE(smallest_ratio_meeting(a, 0.9).has_value());
  const double r = *smallest_ratio_meeting(a, 0.79525);
  EXPECT_NEAR(r, 0.6, 1e-12);
  EXPECT_GE(accuracy_at(a, r), 0.79525);
  EXPECT_EQ(*smallest_ratio_meeting(a, 0.5, 0.45), 0.45);
}

TEST(TraceLoad, EnergyAndPowerHeaders) {
  std::istringstream e("device,f_hz,ratio,latency_s,energy_j\ngpu,612e6,1.0,0.013,0.035\n");
  const auto rows = load_trace_csv(e, "t");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].device, "gpu");
  EXPECT_EQ(rows[0].f_hz, 612e6);
  EXPECT_TRUE(rows[0].energy_j && !rows[0].power_w);
  std::istringstream p("device,f_hz,ratio,latency_s,power_w\ncpu,1e9,0.5,0.1,2.5\n");
  EXPECT_EQ(*load_trace_csv(p, "t")[0].power_w, 2.5);
}

TEST(TraceLoad, RejectsInvalidRows) {
  std::istringstream both("device,f_hz,ratio,latency_s,energy_j,power_w\ng,1,1,1,1,1\n");
  EXPECT_THROW(load_trace_csv(both, "t"), ParseError);
  std::istringstream badratio("device,f_hz,ratio,latency_s,energy_j\ng,1e9,1.5,0.1,0.1\n");
  EXPECT_THROW(load_trace_csv(badratio, "t"), ParseError);
  std::istringstream badlat("device,f_hz,ratio,latency_s,energy_j\ng,1e9,1.0,0,0.1\n");
  EXPECT_THROW(load_trace_csv(badlat, "t"), ParseError);
  std::istringstream short_row("device,f_hz,ratio,latency_s,energy_j\ng,1e9,1.0\n");
  EXPECT_THROW(load_trace_csv(short_row, "t"), ParseError);
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

const WorkByRatio& resnet_work() {
  static const WorkByRatio w = testing::resnet152_trace_work();
  return w;
}

using testing::synthesize_trace;

void expect_recovered(const HardwareProfile& truth, const HardwareProfile& fit, double tol) {
  EXPECT_LT(testing::rel_diff(fit.theta, truth.theta), tol);
  EXPECT_LT(testing::rel_diff(fit.alpha_c, truth.alpha_c), tol);
  EXPECT_LT(testing::rel_diff(fit.vf.f_knee_hz, truth.vf.f_knee_hz), tol);
  EXPECT_LT(testing::rel_diff(fit.vf.k_slope, truth.vf.k_slope), tol);
  EXPECT_LT(testing::rel_diff(fit.vf.v_min, truth.vf.v_min), tol);
  EXPECT_LT(testing::rel_diff(fit.p_static_w, truth.p_static_w), tol);
}

TEST(FitHardwareProfile, RoundTripKnownProfile) {
  const auto truth = make_profile("soc", 900e6, 0.75, 2e-9, 0.6, 2.0, 400e6, 1.8e9);
  const auto rows = synthesize_trace(truth, resnet_work(), 8, false);
  ASSERT_EQ(rows.size(), 24u);
  FitOptions opt;
  opt.v_min = truth.vf.v_min;
  const auto fit = fit_hardware_profile(rows, resnet_work(), opt);
  expect_recovered(truth, fit.profile, 0.01);
  EXPECT_TRUE(fit.report.knee_identified);
  EXPECT_LT(fit.report.max_rel_residual, 1e-6);
  EXPECT_EQ(fit.report.rows.size(), rows.size());
}

TEST(FitHardwareProfile, RoundTripRandomProfiles) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto truth = testing::random_fit_profile(rng);
    const auto rows = synthesize_trace(truth, resnet_work(), 8, i % 2 == 1);
    FitOptions opt;
    opt.v_min = truth.vf.v_min;
    const auto fit = fit_hardware_profile(rows, resnet_work(), opt);
    SCOPED_TRACE("profile " + std::to_string(i));
    expect_recovered(truth, fit.profile, 0.01);
  }
}

TEST(FitHardwareProfile, Underdetermined) {
  const auto truth = make_profile("soc", 900e6, 0.75, 2e-9, 0.6, 2.0, 400e6, 1.8e9);
  auto rows = synthesize_trace(truth, resnet_work(), 8, false);
  rows.resize(2);
  EXPECT_THROW(fit_hardware_profile(rows, resnet_work(), {}), UnderdeterminedError);
  auto same_f = synthesize_trace(truth, resnet_work(), 8, false);
  std::vector<TraceRow> single;
  for (const auto& r : same_f)
    if (r.f_hz == 400e6) single.push_back(r);
  single.push_back(single.front());
  ASSERT_GE(single.size(), 4u);
  EXPECT_THROW(fit_hardware_profile(single, resnet_work(), {}), UnderdeterminedError);
}

TEST(FitHardwareProfile, MissingWorkValue) {
  const auto truth = make_profile("soc", 900e6, 0.75, 2e-9, 0.6, 2.0, 400e6, 1.8e9);
  const auto rows = synthesize_trace(truth, resnet_work(), 4, false);
  WorkByRatio partial = {{1.0, resnet_work().at(1.0)}};
  EXPECT_THROW(fit_hardware_profile(rows, partial, {}), ArgumentError);
}

TEST(FitHardwareProfile, ThetaHomogeneity) {
  const auto truth = make_profile("soc", 900e6, 0.75, 2e-9, 0.6, 2.0, 400e6, 1.8e9);
  auto rows = synthesize_trace(truth, resnet_work(), 8, false);
  // Perturb latencies so the fit is not exact, then rescale work and latency together.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (auto& r : rows) r.latency_s *= 1 + noise(rng);
  const auto base = fit_hardware_profile(rows, resnet_work(), {});
  for (double s : {1e-3, 7.5, 1e4}) {
    auto scaled_rows = rows;
    for (auto& r : scaled_rows) r.latency_s *= s;
    WorkByRatio scaled_work;
    for (const auto& [r, w] : resnet_work()) scaled_work[r] = w * s;
    const auto fit = fit_hardware_profile(scaled_rows, scaled_work, {});
    EXPECT_NEAR(fit.profile.theta / base.profile.theta, 1.0, 1e-12) << s;
  }
}

TEST(FitHardwareProfile, ConstantVoltageTraceUsesKneeHint) {
  const auto truth = make_profile("gpu", 1.5e9, 0.7, 3e-9, 0.0, 20.0, 300e6, 700e6);
  const auto rows = synthesize_trace(truth, resnet_work(), 5, false);
  FitOptions opt;
  opt.knee_hint_hz = 1.5e9;
  opt.v_min = 0.7;
  const auto fit = fit_hardware_profile(rows, resnet_work(), opt);
  EXPECT_FALSE(fit.report.knee_identified);
  EXPECT_EQ(fit.profile.vf.f_knee_hz, 1.5e9);
  EXPECT_LT(testing::rel_diff(fit.profile.alpha_c, truth.alpha_c), 1e-9);
  EXPECT_LT(fit.profile.p_static_w, 1e-12);
}

TEST(FitHardwareProfile, CubicOnlyTraceKeepsHighZoneCoefficient) {
  const auto truth = make_profile("cpu", 200e6, 0.6, 3e-9, 0.4, 1.5, 600e6, 1.5e9);
  const auto rows = synthesize_trace(truth, resnet_work(), 6, false);
  FitOptions opt;
  opt.knee_hint_hz = 250e6;
  opt.v_min = 0.6;
  const auto fit = fit_hardware_profile(rows, resnet_work(), opt);
  EXPECT_FALSE(fit.report.knee_identified);
  EXPECT_EQ(fit.profile.vf.f_knee_hz, 250e6);
  EXPECT_LT(testing::rel_diff(fit.profile.high_zone_coeff(), truth.high_zone_coeff()), 1e-6);
  EXPECT_LT(testing::rel_diff(fit.profile.p_static_w, truth.p_static_w), 1e-6);
}

TEST(FitHardwareProfile, GpuAnchorPoints) {
  std::vector<TraceRow> rows;
  auto add = [&](double f, double r, double t, double e) {
    TraceRow row;
    row.device = "gpu";
    row.f_hz = f;
    row.ratio = r;
    row.latency_s = t;
    row.energy_j = e;
    rows.push_back(row);
  };
  add(612e6, 1.0, 0.013, 0.035);
  add(612e6, 0.27, 0.0045, 0.011);
  add(306e6, 1.0, 0.0265, 0.035);
  add(306e6, 0.27, 0.009, 0.011);
  const auto fn = make_work_fn(build_resnet152(10, 32));
  const WorkByRatio work = {{1.0, fn(1.0)}, {0.27, fn(0.27)}};
  FitOptions opt;
  opt.knee_hint_hz = 1e9;
  const auto fit = fit_hardware_profile(rows, work, opt);
  const auto& p = fit.profile;
  EXPECT_LT(fit.report.max_rel_residual, 0.05);
  EXPECT_NEAR(latency(p, work.at(1.0), 612e6) / 0.013, 1.0, 0.05);
  EXPECT_NEAR(latency(p, work.at(0.27), 612e6) / 0.0045, 1.0, 0.05);
  EXPECT_NEAR(energy(p, work.at(1.0), 612e6) / 0.035, 1.0, 0.05);
  EXPECT_NEAR(energy(p, work.at(0.27), 612e6) / 0.011, 1.0, 0.05);
  EXPECT_NEAR(latency(p, work.at(1.0), 306e6) / 0.0265, 1.0, 0.05);
  EXPECT_NEAR(latency(p, work.at(0.27), 306e6) / 0.009, 1.0, 0.05);
}

}  // namespace
}  // namespace lsfs
