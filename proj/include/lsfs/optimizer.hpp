#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lsfs/errors.hpp"
#include "lsfs/hw_model.hpp"
#include "lsfs/net_model.hpp"
#include "lsfs/pls.hpp"
#include "lsfs/profiles.hpp"

namespace lsfs {

/// Work per frame (MACs) as a function of the remaining-layer ratio.
using WorkFn = std::function<double(double)>;

/// The tabulated ratios used by default for planning.
inline std::vector<double> default_ratio_grid() { return {0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 1.0}; }

/// MACs of `m` after proportional skipping at each ratio.
inline WorkFn make_work_fn(NetworkManifest m) {
  return [m = std::move(m)](double r) {
    const auto plan = make_skip_plan(m, r);
    return static_cast<double>(count_macs(m, &plan));
  };
}

struct ProblemSpec {
  HardwareProfile hardware;
  AccuracyProfile accuracy;
  WorkFn work_fn;
  double gamma = 0.0;              // retained-accuracy floor
  std::optional<double> d_max_s;   // latency budget; unbounded when empty
  double r_min = 0.1;
  std::vector<double> r_grid = default_ratio_grid();
  bool continuous_r = false;       // plan over interpolated a(r) instead of r_grid
};

enum class Constraint { accuracy, latency, f_min, f_max, r_min };

inline std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::accuracy: return "accuracy";
    case Constraint::latency: return "latency";
    case Constraint::f_min: return "f_min";
    case Constraint::f_max: return "f_max";
    case Constraint::r_min: return "r_min";
  }
  return "?";
}

struct PlanResult {
  double ratio = 1.0;
  double f_hz = 0.0;
  double work = 0.0;
  Evaluation eval;
  double accuracy = 0.0;
  std::vector<Constraint> binding;

  bool binds(Constraint c) const { return std::find(binding.begin(), binding.end(), c) != binding.end(); }
};

/// Throws ArgumentError when the problem breaks its invariants.
inline void validate(const ProblemSpec& p) {
  validate(p.hardware);
  if (!p.work_fn) throw ArgumentError("problem has no work function");
  if (!(p.gamma >= 0 && p.gamma <= 1)) throw ArgumentError("gamma must lie in [0, 1]");
  if (p.d_max_s && !(*p.d_max_s > 0)) throw ArgumentError("d_max must be > 0");
  if (!(p.r_min > 0 && p.r_min <= 1)) throw ArgumentError("r_min must lie in (0, 1]");
  if (p.accuracy.points().empty()) throw ArgumentError("problem has no accuracy profile");
  if (p.r_grid.empty()) throw ArgumentError("ratio grid is empty");
  const auto [lo, hi] = std::minmax_element(p.r_grid.begin(), p.r_grid.end());
  if (*hi > 1.0) throw ArgumentError("ratio grid exceeds 1");
  if (!(*lo > 0)) throw ArgumentError("ratio grid must be > 0");
  if (p.r_min > *lo) throw ArgumentError("r_min exceeds the smallest grid ratio");
  if (*lo < p.accuracy.min_ratio())
    throw ArgumentError("ratio grid starts below the tabulated accuracy range (" + std::to_string(*lo) + ")");
}

namespace detail {

inline std::vector<double> sorted_grid(std::vector<double> g) {
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

struct RatioChoice {
  double ratio = 1.0;
  bool accuracy_binding = false;
};

inline RatioChoice choose_ratio(const ProblemSpec& p) {
  if (p.continuous_r) {
    const double lower = std::max(p.r_min, p.accuracy.min_ratio());
    const auto r = smallest_ratio_meeting(p.accuracy, p.gamma, lower);
    if (!r)
      throw InfeasibleError(Infeasibility::accuracy,
                            "no ratio reaches accuracy " + std::to_string(p.gamma));
    return {*r, *r > lower};
  }
  bool rejected = false;
  for (double r : sorted_grid(p.r_grid)) {
    if (r < p.r_min) continue;
    if (accuracy_at(p.accuracy, r) >= p.gamma) return {r, rejected};
    rejected = true;
  }
  throw InfeasibleError(Infeasibility::accuracy, "no admissible ratio reaches accuracy " + std::to_string(p.gamma));
}

// Lowest frequency meeting the latency budget, nudged so latency(f) <= d_max
// holds in floating point.
inline double latency_floor(const HardwareProfile& hw, double work, double d_max) {
  double f = work / (hw.theta * d_max);
  while (work / (hw.theta * f) > d_max) f = std::nextafter(f, INFINITY);
  return f;
}

}  // namespace detail

/// Two-stage planner. Stage 1 picks the smallest admissible ratio whose retained
/// accuracy meets gamma (least work, hence least EDP at any frequency). Stage 2
/// minimizes EDP over the latency-feasible frequency interval by comparing the
/// interval ends, the V/F knee and the interior stationary point of
/// A f + B / f^2; ties go to the lower frequency.
inline PlanResult solve(const ProblemSpec& p) {
  validate(p);
  const auto& hw = p.hardware;
  const auto choice = detail::choose_ratio(p);
  const double work = p.work_fn(choice.ratio);

  double f_lo = hw.f_min_hz;
  bool latency_bound = false;
  if (p.d_max_s) {
    const double need = detail::latency_floor(hw, work, *p.d_max_s);
    if (need > hw.f_min_hz) {
      f_lo = need;
      latency_bound = true;
    }
  }
  if (p.d_max_s && f_lo > hw.f_max_hz && latency(hw, work, hw.f_max_hz) <= *p.d_max_s) f_lo = hw.f_max_hz;
  if (f_lo > hw.f_max_hz)
    throw InfeasibleError(Infeasibility::latency, "latency budget needs " + std::to_string(f_lo) +
                                                      " Hz, above f_max " + std::to_string(hw.f_max_hz));

  std::vector<double> candidates = {f_lo, hw.f_max_hz};
  const double knee = hw.vf.f_knee_hz;
  if (knee > f_lo && knee < hw.f_max_hz) candidates.push_back(knee);
  const double stationary = edp_stationary_frequency(hw);
  if (stationary > knee && stationary > f_lo && stationary < hw.f_max_hz) candidates.push_back(stationary);
  std::sort(candidates.begin(), candidates.end());

  PlanResult best;
  double best_edp = INFINITY;
  for (double f : candidates) {
    const auto e = evaluate(hw, work, f);
    if (e.edp_js < best_edp) {
      best_edp = e.edp_js;
      best.f_hz = f;
      best.eval = e;
    }
  }
  best.ratio = choice.ratio;
  best.work = work;
  best.accuracy = accuracy_at(p.accuracy, choice.ratio);
  if (choice.accuracy_binding) best.binding.push_back(Constraint::accuracy);
  if (latency_bound && best.f_hz == f_lo) best.binding.push_back(Constraint::latency);
  if (best.f_hz == hw.f_min_hz) best.binding.push_back(Constraint::f_min);
  if (best.f_hz == hw.f_max_hz) best.binding.push_back(Constraint::f_max);
  if (choice.ratio == p.r_min) best.binding.push_back(Constraint::r_min);
  return best;
}

/// Uniform frequency grid of `steps` points spanning [f_min, f_max].
inline std::vector<double> frequency_grid(const HardwareProfile& hw, std::size_t steps) {
  if (steps < 2) throw ArgumentError("f_steps must be >= 2");
  std::vector<double> f(steps);
  const double span = hw.f_max_hz - hw.f_min_hz;
  for (std::size_t i = 0; i < steps; ++i)
    f[i] = hw.f_min_hz + span * static_cast<double>(i) / static_cast<double>(steps - 1);
  f.back() = hw.f_max_hz;
  return f;
}

/// Exhaustive search over every grid ratio and every grid frequency that
/// satisfies all constraints. Independent of solve's two-stage reasoning.
inline PlanResult brute_force(const ProblemSpec& p, std::size_t f_steps) {
  validate(p);
  const auto& hw = p.hardware;
  const auto freqs = frequency_grid(hw, f_steps);
  bool any_accurate = false;
  bool found = false;
  PlanResult best;
  for (double r : detail::sorted_grid(p.r_grid)) {
    if (r < p.r_min) continue;
    const double acc = accuracy_at(p.accuracy, r);
    if (acc < p.gamma) continue;
    any_accurate = true;
    const double work = p.work_fn(r);
    for (double f : freqs) {
      const auto e = evaluate(hw, work, f);
      if (p.d_max_s && e.latency_s > *p.d_max_s) continue;
      if (!found || e.edp_js < best.eval.edp_js) {
        found = true;
        best.ratio = r;
        best.f_hz = f;
        best.work = work;
        best.eval = e;
        best.accuracy = acc;
      }
    }
  }
  if (!any_accurate)
    throw InfeasibleError(Infeasibility::accuracy, "no admissible ratio reaches accuracy " + std::to_string(p.gamma));
  if (!found) throw InfeasibleError(Infeasibility::latency, "no grid point meets the latency budget");
  if (best.f_hz == hw.f_min_hz) best.binding.push_back(Constraint::f_min);
  if (best.f_hz == hw.f_max_hz) best.binding.push_back(Constraint::f_max);
  return best;
}

struct SweepRow {
  double ratio = 0.0;
  double f_hz = 0.0;
  double latency_s = 0.0;
  double energy_j = 0.0;
  double edp_js = 0.0;
  double accuracy = 0.0;
};

/// Full factorial (ratio x frequency) evaluation without constraint filtering.
/// Rows are ordered ratio-major ascending, frequency ascending; ratio blocks are
/// evaluated on worker threads into fixed slots.
inline std::vector<SweepRow> sweep(const ProblemSpec& p, std::size_t f_steps, unsigned threads = 0) {
  validate(p);
  const auto freqs = frequency_grid(p.hardware, f_steps);
  const auto ratios = detail::sorted_grid(p.r_grid);
  std::vector<SweepRow> rows(ratios.size() * freqs.size());

  auto fill = [&](std::size_t ri) {
    const double r = ratios[ri];
    const double work = p.work_fn(r);
    const double acc = accuracy_at(p.accuracy, r);
    for (std::size_t fi = 0; fi < freqs.size(); ++fi) {
      const auto e = evaluate(p.hardware, work, freqs[fi]);
      rows[ri * freqs.size() + fi] = {r, freqs[fi], e.latency_s, e.energy_j, e.edp_js, acc};
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, ratios.size()));
  if (threads <= 1) {
    for (std::size_t ri = 0; ri < ratios.size(); ++ri) fill(ri);
    return rows;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t ri = t; ri < ratios.size(); ri += threads) fill(ri);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "ratio,f_hz,latency_s,energy_j,edp_js,accuracy\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%.10g,%.10g,%.6g\n", r.ratio, r.f_hz, r.latency_s, r.energy_j,
                  r.edp_js, r.accuracy);
    out << buf;
  }
}

}  // namespace lsfs
