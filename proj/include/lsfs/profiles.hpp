#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lsfs/csv.hpp"
#include "lsfs/errors.hpp"
#include "lsfs/hw_model.hpp"

namespace lsfs {

// ---------------------------------------------------------------------------
// Accuracy map a(r)
// ---------------------------------------------------------------------------

struct AccuracyPoint {
  double ratio = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
};

/// Retained accuracy as a function of the remaining-layer ratio, tabulated at
/// strictly increasing ratios ending at r = 1.
class AccuracyProfile {
 public:
  AccuracyProfile() = default;

  /// Sorts by ratio and validates; throws ArgumentError on duplicate ratios,
  /// decreasing accuracy, values outside [0, 1] or a missing r = 1 knot.
  explicit AccuracyProfile(std::vector<AccuracyPoint> points) : points_(std::move(points)) {
    if (points_.empty()) throw ArgumentError("accuracy profile is empty");
    std::sort(points_.begin(), points_.end(), [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (!(p.ratio > 0.0 && p.ratio <= 1.0))
        throw ArgumentError("accuracy profile ratio " + std::to_string(p.ratio) + " outside (0, 1]");
      if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0))
        throw ArgumentError("accuracy " + std::to_string(p.accuracy) + " outside [0, 1]");
      if (i > 0) {
        if (p.ratio == points_[i - 1].ratio)
          throw ArgumentError("duplicate ratio " + std::to_string(p.ratio) + " in accuracy profile");
        if (p.accuracy < points_[i - 1].accuracy)
          throw ArgumentError("accuracy decreases between r = " + std::to_string(points_[i - 1].ratio) +
                              " and r = " + std::to_string(p.ratio));
      }
    }
    if (points_.back().ratio != 1.0) throw ArgumentError("accuracy profile must contain r = 1");
  }

  const std::vector<AccuracyPoint>& points() const { return points_; }
  double reference_accuracy() const { return points_.back().accuracy; }
  double min_ratio() const { return points_.front().ratio; }

 private:
  std::vector<AccuracyPoint> points_;
};

/// Piecewise-linear interpolation, exact at the knots; no extrapolation.
inline double accuracy_at(const AccuracyProfile& profile, double r) {
  const auto& pts = profile.points();
  if (pts.empty()) throw DomainError("accuracy profile is empty");
  if (!(r >= pts.front().ratio && r <= 1.0))
    throw DomainError("ratio " + std::to_string(r) + " outside tabulated range [" + std::to_string(pts.front().ratio) +
                      ", 1]");
  auto hi = std::lower_bound(pts.begin(), pts.end(), r, [](const AccuracyPoint& p, double x) { return p.ratio < x; });
  if (hi->ratio == r) return hi->accuracy;
  auto lo = hi - 1;
  const double t = (r - lo->ratio) / (hi->ratio - lo->ratio);
  return lo->accuracy + t * (hi->accuracy - lo->accuracy);
}

inline double accuracy_loss_at(const AccuracyProfile& profile, double r) {
  return profile.reference_accuracy() - accuracy_at(profile, r);
}

/// Smallest r in [max(lower, min tabulated), 1] with accuracy_at(r) >= gamma,
/// or nullopt when even r = 1 falls short.
inline std::optional<double> smallest_ratio_meeting(const AccuracyProfile& profile, double gamma, double lower = 0.0) {
  const auto& pts = profile.points();
  const double start = std::max(lower, profile.min_ratio());
  if (start > 1.0) return std::nullopt;
  if (accuracy_at(profile, start) >= gamma) return start;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    if (b.ratio <= start || b.accuracy < gamma) continue;
    // a(r) crosses gamma inside (max(a.ratio, start), b.ratio].
    double r = b.ratio;
    if (b.accuracy > a.accuracy) r = a.ratio + (gamma - a.accuracy) / (b.accuracy - a.accuracy) * (b.ratio - a.ratio);
    r = std::clamp(r, std::max(a.ratio, start), b.ratio);
    while (r < b.ratio && accuracy_at(profile, r) < gamma) r = std::nextafter(r, 2.0);
    return r;
  }
  return std::nullopt;
}

/// Reads a `ratio,accuracy` CSV. Accuracy values are fractions unless any value
/// exceeds 1, in which case the whole column is read as percent in (1, 100].
inline AccuracyProfile load_accuracy_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read(in, source);
  const int rc = table.column("ratio");
  const int ac = table.column("accuracy");
  if (rc < 0 || ac < 0) throw ParseError(source, 1, "header must contain 'ratio,accuracy'");
  std::vector<AccuracyPoint> pts;
  std::vector<const csv::Record*> recs;
  bool percent = false;
  for (const auto& rec : table.records) {
    recs.push_back(&rec);
    AccuracyPoint p;
    p.ratio = csv::to_double(rec.fields[rc], source, rec.line);
    p.accuracy = csv::to_double(rec.fields[ac], source, rec.line);
    if (p.accuracy < 0 || p.accuracy > 100) throw ParseError(source, rec.line, "accuracy outside [0, 100]");
    if (p.accuracy > 1) percent = true;
    pts.push_back(p);
  }
  // Re-read with a decimal exponent so 83.96 becomes the double nearest 0.8396.
  if (percent)
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string text(csv::trim(recs[i]->fields[ac]));
      if (text.find_first_of("eE") == std::string::npos)
        pts[i].accuracy = csv::to_double(text + "e-2", source, recs[i]->line);
      else
        pts[i].accuracy /= 100.0;
    }
  try {
    return AccuracyProfile(std::move(pts));
  } catch (const ArgumentError& e) {
    throw ParseError(source, 0, e.what());
  }
}

inline AccuracyProfile load_accuracy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return load_accuracy_csv(in, path);
}

// ---------------------------------------------------------------------------
// Measurement traces
// ---------------------------------------------------------------------------

struct TraceRow {
  std::string device;
  double f_hz = 0.0;
  double ratio = 1.0;
  double latency_s = 0.0;
  std::optional<double> energy_j;
  std::optional<double> power_w;
  std::size_t line = 0;  // source line, 0 when built in memory
};

inline void validate(const TraceRow& row) {
  const std::string where = row.line ? "trace line " + std::to_string(row.line) : std::string("trace row");
  if (!(row.f_hz > 0)) throw ArgumentError(where + ": f_hz must be > 0");
  if (!(row.ratio > 0 && row.ratio <= 1)) throw ArgumentError(where + ": ratio must lie in (0, 1]");
  if (!(row.latency_s > 0)) throw ArgumentError(where + ": latency_s must be > 0");
  if (row.energy_j.has_value() == row.power_w.has_value())
    throw ArgumentError(where + ": exactly one of energy_j / power_w is required");
  if (row.energy_j && !(*row.energy_j > 0)) throw ArgumentError(where + ": energy_j must be > 0");
  if (row.power_w && !(*row.power_w > 0)) throw ArgumentError(where + ": power_w must be > 0");
}

/// Header `device,f_hz,ratio,latency_s,energy_j` or with `power_w` in place of
/// `energy_j`.
inline std::vector<TraceRow> load_trace_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read(in, source);
  const int dc = table.column("device");
  const int fc = table.column("f_hz");
  const int rc = table.column("ratio");
  const int lc = table.column("latency_s");
  const int ec = table.column("energy_j");
  const int pc = table.column("power_w");
  if (dc < 0 || fc < 0 || rc < 0 || lc < 0 || (ec < 0) == (pc < 0))
    throw ParseError(source, 1, "header must be 'device,f_hz,ratio,latency_s,energy_j' or '...,power_w'");
  std::vector<TraceRow> rows;
  for (const auto& rec : table.records) {
    TraceRow row;
    row.line = rec.line;
    row.device = rec.fields[dc];
    row.f_hz = csv::to_double(rec.fields[fc], source, rec.line);
    row.ratio = csv::to_double(rec.fields[rc], source, rec.line);
    row.latency_s = csv::to_double(rec.fields[lc], source, rec.line);
    if (ec >= 0)
      row.energy_j = csv::to_double(rec.fields[ec], source, rec.line);
    else
      row.power_w = csv::to_double(rec.fields[pc], source, rec.line);
    try {
      validate(row);
    } catch (const ArgumentError& e) {
      throw ParseError(source, rec.line, e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<TraceRow> load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return load_trace_csv(in, path);
}

/// Work per frame (MACs) keyed by skip ratio.
using WorkByRatio = std::map<double, double>;

/// Header `ratio,macs`.
inline WorkByRatio load_work_csv(std::istream& in, const std::string& source) {
  const auto table = csv::read(in, source);
  const int rc = table.column("ratio");
  const int mc = table.column("macs");
  if (rc < 0 || mc < 0) throw ParseError(source, 1, "header must contain 'ratio,macs'");
  WorkByRatio work;
  for (const auto& rec : table.records) {
    const double r = csv::to_double(rec.fields[rc], source, rec.line);
    const double w = csv::to_double(rec.fields[mc], source, rec.line);
    if (!(w > 0)) throw ParseError(source, rec.line, "macs must be > 0");
    if (!work.emplace(r, w).second) throw ParseError(source, rec.line, "duplicate ratio");
  }
  return work;
}

inline WorkByRatio load_work_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return load_work_csv(in, path);
}

inline double work_for_ratio(const WorkByRatio& work, double r) {
  auto it = work.lower_bound(r - 1e-9);
  if (it == work.end() || std::abs(it->first - r) > 1e-9)
    throw ArgumentError("no work value for ratio " + std::to_string(r));
  return it->second;
}

// ---------------------------------------------------------------------------
// Profile calibration
// ---------------------------------------------------------------------------

struct FitOptions {
  double knee_hint_hz = 0.0;  // used when the trace does not pin the knee down
  double v_min = 1.0;         // voltage gauge: only alpha_c * v_min^2 is observable
  std::optional<double> f_min_hz;
  std::optional<double> f_max_hz;
  std::string label;
};

struct FitRowReport {
  std::size_t index = 0;
  std::size_t line = 0;
  double predicted_latency_s = 0.0;
  double latency_rel_residual = 0.0;
  double predicted_power_or_energy = 0.0;
  double power_or_energy_rel_residual = 0.0;
  double max_rel_residual = 0.0;
};

struct FitReport {
  std::vector<FitRowReport> rows;
  double max_rel_residual = 0.0;
  bool knee_identified = false;  // false: knee taken from the hint
  double low_zone_coeff = 0.0;   // alpha_c * v_min^2
  double high_zone_coeff = 0.0;  // alpha_c / k_slope^2
};

struct FitResult {
  HardwareProfile profile;
  FitReport report;
};

namespace detail {

struct PowerFit {
  double coeff = 0.0;
  double p_static = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Dynamic-power shape at frequency f for a knee: f below, f^3 / knee^2 above.
inline double zone_shape(double f, double knee) { return f <= knee ? f : f * f * f / (knee * knee); }

struct PowerRow {
  double f;
  double scale;     // 1 for power rows, W / (theta f) for energy rows
  double observed;  // power or energy
};

// Relative least squares of observed = (coeff * shape(f) + p_static) * scale
// with p_static >= 0 enforced by refitting without it when negative.
inline PowerFit fit_power_at_knee(const std::vector<PowerRow>& rows, double knee) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    a(i, 0) = zone_shape(r.f, knee) * r.scale / r.observed;
    a(i, 1) = r.scale / r.observed;
  }
  // Column scaling keeps the QR well conditioned for f^3 magnitudes.
  const Eigen::Vector2d norms(a.col(0).norm(), a.col(1).norm());
  Eigen::MatrixXd as = a;
  as.col(0) /= norms(0);
  as.col(1) /= norms(1);
  Eigen::Vector2d x = as.colPivHouseholderQr().solve(b);
  PowerFit fit;
  fit.coeff = x(0) / norms(0);
  fit.p_static = x(1) / norms(1);
  if (fit.p_static < 0) {
    fit.p_static = 0;
    fit.coeff = a.col(0).dot(b) / a.col(0).squaredNorm();
  }
  fit.sse = (a.col(0) * fit.coeff + a.col(1) * fit.p_static - b).squaredNorm();
  return fit;
}

}  // namespace detail

/// Least-squares calibration of a HardwareProfile from a measurement trace.
///
/// theta comes from the latency rows (latency = W / (theta f)). The dynamic
/// coefficient, static power and V/F knee come from the energy or power rows,
/// with the knee found by a 1-D search and continuity imposed at it. Residuals
/// are relative to the observed values. When every row sits on one side of the
/// knee the knee is not observable and `knee_hint_hz` decides it.
///
/// Throws UnderdeterminedError for fewer than 4 rows or a single frequency, and
/// FitError when theta or the dynamic coefficient comes out non-positive.
inline FitResult fit_hardware_profile(const std::vector<TraceRow>& rows, const WorkByRatio& work_by_ratio,
                                      const FitOptions& options) {
  constexpr std::size_t kFreeCoefficients = 4;
  if (rows.size() < kFreeCoefficients)
    throw UnderdeterminedError("calibration needs at least " + std::to_string(kFreeCoefficients) + " rows, got " +
                               std::to_string(rows.size()));
  std::set<double> freqs;
  for (const auto& r : rows) {
    validate(r);
    freqs.insert(r.f_hz);
  }
  if (freqs.size() < 2) throw UnderdeterminedError("calibration needs rows at two or more distinct frequencies");
  if (!(options.v_min > 0)) throw ArgumentError("v_min gauge must be > 0");

  std::vector<double> work;
  work.reserve(rows.size());
  for (const auto& r : rows) work.push_back(work_for_ratio(work_by_ratio, r.ratio));

  // Latency: tau_i = u * x_i with u = 1 / theta, relative residuals.
  double num = 0, den = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double q = work[i] / rows[i].f_hz / rows[i].latency_s;
    num += q;
    den += q * q;
  }
  const double u = num / den;
  if (!(u > 0) || !std::isfinite(u)) throw FitError("fitted throughput coefficient theta is not positive");
  const double theta = 1.0 / u;

  std::vector<detail::PowerRow> prow;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.power_w)
      prow.push_back({r.f_hz, 1.0, *r.power_w});
    else
      prow.push_back({r.f_hz, work[i] / (theta * r.f_hz), *r.energy_j});
  }

  const double f_lo = *freqs.begin();
  const double f_hi = *freqs.rbegin();

  // Knee above every row or below every row: flat SSE, knee not observable.
  const auto all_low = detail::fit_power_at_knee(prow, f_hi);
  const auto all_high = detail::fit_power_at_knee(prow, f_lo * (1 - 1e-12));

  // Interior search on a log grid, then golden-section refinement.
  constexpr int kGrid = 400;
  double best_knee = f_lo;
  detail::PowerFit best;
  std::vector<double> grid;
  for (int i = 0; i <= kGrid; ++i) grid.push_back(f_lo * std::pow(f_hi / f_lo, static_cast<double>(i) / kGrid));
  for (double f : freqs) grid.push_back(f);
  std::sort(grid.begin(), grid.end());
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto fit = detail::fit_power_at_knee(prow, grid[i]);
    if (fit.sse < best.sse) {
      best = fit;
      best_knee = grid[i];
      best_i = i;
    }
  }
  {
    double a = grid[best_i == 0 ? 0 : best_i - 1];
    double b = grid[std::min(best_i + 1, grid.size() - 1)];
    const double g = (std::sqrt(5.0) - 1) / 2;
    double c = b - g * (b - a), d = a + g * (b - a);
    auto fc = detail::fit_power_at_knee(prow, c), fd = detail::fit_power_at_knee(prow, d);
    for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
      if (fc.sse < fd.sse) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = detail::fit_power_at_knee(prow, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = detail::fit_power_at_knee(prow, d);
      }
    }
    const double mid = 0.5 * (a + b);
    auto fm = detail::fit_power_at_knee(prow, mid);
    if (fm.sse < best.sse) {
      best = fm;
      best_knee = mid;
    }
  }

  FitReport report;
  double knee = best_knee;
  detail::PowerFit chosen = best;
  auto beats = [](const detail::PowerFit& x, const detail::PowerFit& y) {
    return x.sse < y.sse * (1 - 1e-9) - 1e-24;
  };
  report.knee_identified = beats(best, all_low) && beats(best, all_high);
  if (!report.knee_identified) {
    const double hint = options.knee_hint_hz > 0 ? options.knee_hint_hz : f_hi;
    if (!beats(all_high, all_low)) {
      knee = std::max(hint, f_hi);
      chosen = all_low;
    } else {
      // Only coeff / knee^2 is observed; keep that product fixed at the hinted knee.
      const double fitted_at = f_lo * (1 - 1e-12);
      knee = std::min(hint, f_lo);
      chosen = all_high;
      chosen.coeff = all_high.coeff * (knee * knee) / (fitted_at * fitted_at);
    }
  }
  if (!(chosen.coeff > 0) || !std::isfinite(chosen.coeff))
    throw FitError("fitted dynamic power coefficient is not positive");

  HardwareProfile p;
  p.label = options.label.empty() ? rows.front().device : options.label;
  p.vf.f_knee_hz = knee;
  p.vf.v_min = options.v_min;
  p.vf.k_slope = knee / options.v_min;
  p.alpha_c = chosen.coeff / (options.v_min * options.v_min);
  p.p_static_w = chosen.p_static;
  p.theta = theta;
  p.f_min_hz = options.f_min_hz.value_or(f_lo);
  p.f_max_hz = options.f_max_hz.value_or(f_hi);
  validate(p);

  report.low_zone_coeff = p.low_zone_coeff();
  report.high_zone_coeff = p.high_zone_coeff();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    FitRowReport rr;
    rr.index = i;
    rr.line = r.line;
    rr.predicted_latency_s = work[i] / (theta * r.f_hz);
    rr.latency_rel_residual = rr.predicted_latency_s / r.latency_s - 1.0;
    const double power = chosen.coeff * detail::zone_shape(r.f_hz, knee) + chosen.p_static;
    if (r.power_w) {
      rr.predicted_power_or_energy = power;
      rr.power_or_energy_rel_residual = power / *r.power_w - 1.0;
    } else {
      rr.predicted_power_or_energy = power * rr.predicted_latency_s;
      rr.power_or_energy_rel_residual = rr.predicted_power_or_energy / *r.energy_j - 1.0;
    }
    rr.max_rel_residual = std::max(std::abs(rr.latency_rel_residual), std::abs(rr.power_or_energy_rel_residual));
    report.max_rel_residual = std::max(report.max_rel_residual, rr.max_rel_residual);
    report.rows.push_back(rr);
  }
  return {p, report};
}

inline nlohmann::json to_json_value(const FitReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"row", x.index},
                    {"line", x.line},
                    {"predicted_latency_s", x.predicted_latency_s},
                    {"latency_rel_residual", x.latency_rel_residual},
                    {"predicted_power_or_energy", x.predicted_power_or_energy},
                    {"power_or_energy_rel_residual", x.power_or_energy_rel_residual},
                    {"max_rel_residual", x.max_rel_residual}});
  return {{"max_rel_residual", r.max_rel_residual},
          {"knee_identified", r.knee_identified},
          {"low_zone_coeff", r.low_zone_coeff},
          {"high_zone_coeff", r.high_zone_coeff},
          {"rows", std::move(rows)}};
}

}  // namespace lsfs
