#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "lsfs/errors.hpp"

namespace lsfs {

/// Two-zone voltage/frequency curve: constant v_min up to the knee, then
/// f = k_slope * V. Continuity requires f_knee == k_slope * v_min.
struct VfCurve {
  double f_knee_hz = 0.0;
  double v_min = 0.0;
  double k_slope = 0.0;  // Hz per volt

  double voltage(double f_hz) const { return f_hz <= f_knee_hz ? v_min : f_hz / k_slope; }
};

struct HardwareProfile {
  VfCurve vf;
  double alpha_c = 0.0;    // activity factor times switched capacitance
  double p_static_w = 0.0;
  double theta = 0.0;      // MACs retired per cycle
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;
  std::string label;

  /// Dynamic power coefficient below the knee: P = low_zone_coeff() * f.
  double low_zone_coeff() const { return alpha_c * vf.v_min * vf.v_min; }
  /// Dynamic power coefficient above the knee: P = high_zone_coeff() * f^3.
  double high_zone_coeff() const { return alpha_c / (vf.k_slope * vf.k_slope); }
};

struct Evaluation {
  double latency_s = 0.0;
  double energy_j = 0.0;
  double edp_js = 0.0;
  double avg_power_w = 0.0;
};

/// Throws ArgumentError when a coefficient is out of range or the V/F curve is
/// discontinuous at the knee.
inline void validate(const HardwareProfile& p) {
  auto bad = [&](const std::string& what) { throw ArgumentError("hardware profile '" + p.label + "': " + what); };
  if (!(p.vf.v_min > 0)) bad("v_min must be > 0");
  if (!(p.vf.k_slope > 0)) bad("k_slope must be > 0");
  if (!(p.vf.f_knee_hz > 0)) bad("f_knee must be > 0");
  if (std::abs(p.vf.f_knee_hz - p.vf.k_slope * p.vf.v_min) > 1e-9 * p.vf.f_knee_hz)
    bad("f_knee must equal k_slope * v_min");
  if (!(p.alpha_c >= 0) || !std::isfinite(p.alpha_c)) bad("alpha_c must be >= 0");
  if (!(p.p_static_w >= 0) || !std::isfinite(p.p_static_w)) bad("p_static must be >= 0");
  if (!(p.theta > 0) || !std::isfinite(p.theta)) bad("theta must be > 0");
  if (!(p.f_min_hz > 0)) bad("f_min must be > 0");
  if (!(p.f_min_hz <= p.f_max_hz) || !std::isfinite(p.f_max_hz)) bad("f_min must not exceed f_max");
}

/// Builds a profile from the knee and v_min, deriving k_slope for continuity.
inline HardwareProfile make_profile(std::string label, double f_knee_hz, double v_min, double alpha_c,
                                    double p_static_w, double theta, double f_min_hz, double f_max_hz) {
  HardwareProfile p;
  p.label = std::move(label);
  p.vf = {f_knee_hz, v_min, f_knee_hz / v_min};
  p.alpha_c = alpha_c;
  p.p_static_w = p_static_w;
  p.theta = theta;
  p.f_min_hz = f_min_hz;
  p.f_max_hz = f_max_hz;
  validate(p);
  return p;
}

namespace detail {
inline void check_frequency(const HardwareProfile& p, double f_hz) {
  if (!(f_hz >= p.f_min_hz && f_hz <= p.f_max_hz))
    throw ArgumentError("frequency " + std::to_string(f_hz) + " Hz outside [" + std::to_string(p.f_min_hz) + ", " +
                        std::to_string(p.f_max_hz) + "]");
}
inline void check_work(double work) {
  if (!(work >= 0) || !std::isfinite(work)) throw ArgumentError("work must be a finite value >= 0");
}
}  // namespace detail

inline double voltage_at(const HardwareProfile& p, double f_hz) {
  detail::check_frequency(p, f_hz);
  return p.vf.voltage(f_hz);
}

inline double dynamic_power(const HardwareProfile& p, double f_hz) {
  const double v = voltage_at(p, f_hz);
  return p.alpha_c * v * v * f_hz;
}

inline double total_power(const HardwareProfile& p, double f_hz) { return dynamic_power(p, f_hz) + p.p_static_w; }

/// Compute-bound latency: work / (theta * f).
inline double latency(const HardwareProfile& p, double work, double f_hz) {
  detail::check_frequency(p, f_hz);
  detail::check_work(work);
  return work / (p.theta * f_hz);
}

// Power is constant over a frame at fixed f, so the energy integral is power * latency.
inline double energy(const HardwareProfile& p, double work, double f_hz) {
  return total_power(p, f_hz) * latency(p, work, f_hz);
}

inline double edp(const HardwareProfile& p, double work, double f_hz) {
  const double t = latency(p, work, f_hz);
  return total_power(p, f_hz) * t * t;
}

inline Evaluation evaluate(const HardwareProfile& p, double work, double f_hz) {
  Evaluation e;
  const double power = total_power(p, f_hz);
  e.latency_s = latency(p, work, f_hz);
  e.energy_j = power * e.latency_s;
  e.edp_js = e.energy_j * e.latency_s;
  e.avg_power_w = e.latency_s > 0 ? e.energy_j / e.latency_s : power;
  return e;
}

/// Stationary point of EDP(f) = A f + B / f^2 in the linear V/F zone:
/// (2 p_static k_slope^2 / alpha_c)^(1/3). Infinite when alpha_c == 0.
inline double edp_stationary_frequency(const HardwareProfile& p) {
  if (p.alpha_c <= 0) return std::numeric_limits<double>::infinity();
  return std::cbrt(2.0 * p.p_static_w * p.vf.k_slope * p.vf.k_slope / p.alpha_c);
}

inline nlohmann::json to_json_value(const HardwareProfile& p) {
  nlohmann::json j;
  j["label"] = p.label;
  j["f_knee_hz"] = p.vf.f_knee_hz;
  j["v_min"] = p.vf.v_min;
  j["k_slope"] = p.vf.k_slope;
  j["alpha_c"] = p.alpha_c;
  j["p_static_w"] = p.p_static_w;
  j["theta_macs_per_cycle"] = p.theta;
  j["f_min_hz"] = p.f_min_hz;
  j["f_max_hz"] = p.f_max_hz;
  return j;
}

inline HardwareProfile hardware_profile_from_json(const nlohmann::json& j) {
  HardwareProfile p;
  try {
    p.label = j.value("label", std::string());
    p.vf.f_knee_hz = j.at("f_knee_hz").get<double>();
    p.vf.v_min = j.at("v_min").get<double>();
    p.vf.k_slope = j.at("k_slope").get<double>();
    p.alpha_c = j.at("alpha_c").get<double>();
    p.p_static_w = j.at("p_static_w").get<double>();
    p.theta = j.at("theta_macs_per_cycle").get<double>();
    p.f_min_hz = j.at("f_min_hz").get<double>();
    p.f_max_hz = j.at("f_max_hz").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("hardware profile", 0, e.what());
  }
  validate(p);
  return p;
}

}  // namespace lsfs
