#pragma once

// Command implementations behind the `lsfs` executable. Each run_* function
// does the work and returns printable text; main() only parses flags and maps
// exceptions to exit codes, so everything here is testable in-process.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsfs/errors.hpp"
#include "lsfs/hw_model.hpp"
#include "lsfs/net_model.hpp"
#include "lsfs/optimizer.hpp"
#include "lsfs/pls.hpp"
#include "lsfs/profiles.hpp"

namespace lsfs {

enum ExitCode : int {
  kExitOk = 0,
  kExitArgument = 2,
  kExitParse = 3,
  kExitAccuracyInfeasible = 4,
  kExitLatencyInfeasible = 5,
  kExitFitFailure = 6,
};

/// Maps the library's exception types onto the documented exit codes. Must be
/// called from inside a catch block.
inline int exit_code_for_current_exception(std::string& message) {
  try {
    throw;
  } catch (const InfeasibleError& e) {
    message = std::string(e.kind() == Infeasibility::accuracy ? "accuracy-infeasible: " : "latency-infeasible: ") +
              e.what();
    return e.kind() == Infeasibility::accuracy ? kExitAccuracyInfeasible : kExitLatencyInfeasible;
  } catch (const ParseError& e) {
    message = std::string("parse error: ") + e.what();
    return kExitParse;
  } catch (const FitError& e) {
    message = std::string("fit failure: ") + e.what();
    return kExitFitFailure;
  } catch (const ArgumentError& e) {
    message = std::string("argument error: ") + e.what();
    return kExitArgument;
  } catch (const DomainError& e) {
    message = std::string("argument error: ") + e.what();
    return kExitArgument;
  } catch (const StructureError& e) {
    message = std::string("structure error: ") + e.what();
    return kExitParse;
  } catch (const std::exception& e) {
    message = std::string("error: ") + e.what();
    return kExitArgument;
  }
}

// ---------------------------------------------------------------------------
// Number formatting (fixed so golden outputs are stable)
// ---------------------------------------------------------------------------

inline std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::string format_params_millions(std::uint64_t params) { return format("%.2f", params / 1e6) + "M"; }
inline std::string format_percent(double fraction) { return format("%.2f", fraction * 100.0) + "%"; }
inline std::string format_mj(double joules) { return format("%.2f", joules * 1e3) + " mJ"; }
inline std::string format_ms(double seconds) { return format("%.3f", seconds * 1e3) + " ms"; }
inline std::string format_mhz(double hz) { return format("%.2f", hz / 1e6) + " MHz"; }
inline std::string format_edp(double js) { return format("%.3g", js) + " J*s"; }

inline std::vector<double> parse_ratio_list(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = std::string(csv::trim(item));
    if (t.empty()) continue;
    double r = 0;
    try {
      r = csv::to_double(t, "ratio list", 0);
    } catch (const ParseError&) {
      throw ArgumentError("invalid ratio '" + t + "'");
    }
    if (!(r > 0 && r <= 1)) throw ArgumentError("ratio " + t + " outside (0, 1]");
    out.push_back(r);
  }
  if (out.empty()) throw ArgumentError("empty ratio list");
  return out;
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

/// Published ResNet-152 / CIFAR-10 counts for the PLS ratios, used to annotate
/// the table.
struct PublishedRow {
  double ratio;
  double params_millions;
  double compression_percent;
  double accuracy_percent;
};

inline const std::vector<PublishedRow>& published_resnet152_cifar10() {
  static const std::vector<PublishedRow> rows = {
      {1.0, 58.16, 0.0, 87.64},  {0.9, 54.81, 5.76, 86.16},  {0.8, 50.06, 13.93, 83.96}, {0.7, 46.42, 20.19, 81.18},
      {0.5, 29.04, 50.07, 77.87}, {0.3, 17.25, 70.34, 69.05}, {0.1, 9.15, 84.27, 55.65},
  };
  return rows;
}

inline std::optional<PublishedRow> published_row(double ratio) {
  for (const auto& p : published_resnet152_cifar10())
    if (std::abs(p.ratio - ratio) < 1e-9) return p;
  return std::nullopt;
}

struct Table1Row {
  double ratio = 1.0;
  std::vector<std::size_t> kept_counts;
  std::uint64_t params = 0;
  double compression = 0.0;
  std::optional<PublishedRow> published;

  // Parameter count within 0.2 % of the published value.
  bool matches_published() const {
    return published && std::abs(params / 1e6 - published->params_millions) <= 0.002 * published->params_millions;
  }
};

inline std::vector<Table1Row> run_table1(const std::vector<double>& ratios, std::size_t num_classes = 10,
                                         std::size_t input_side = 32) {
  for (double r : ratios)
    if (!(r > 0 && r <= 1)) throw ArgumentError("ratio " + std::to_string(r) + " outside (0, 1]");
  const auto m = build_resnet152(num_classes, input_side);
  std::vector<Table1Row> rows;
  for (double r : ratios) {
    const auto plan = make_skip_plan(m, r);
    Table1Row row;
    row.ratio = r;
    row.kept_counts = plan.kept_counts;
    row.params = count_params(m, &plan);
    row.compression = compression_rate(m, plan);
    if (num_classes == 10) row.published = published_row(r);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string join_counts(const std::vector<std::size_t>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

inline std::string render_table1(const std::vector<Table1Row>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %-16s %12s %12s %12s\n", "ratio", "kept blocks", "params", "compression",
                "published");
  out << buf;
  for (const auto& r : rows) {
    const std::string kept = "[" + join_counts(r.kept_counts, ",") + "]";
    const std::string pub = r.published ? format("%.2f", r.published->params_millions) + "M" : std::string("-");
    std::snprintf(buf, sizeof buf, "%-8.2f %-16s %12s %12s %12s\n", r.ratio, kept.c_str(),
                  format_params_millions(r.params).c_str(), format_percent(r.compression).c_str(), pub.c_str());
    out << buf;
  }
  for (const auto& r : rows) {
    if (r.published && !r.matches_published()) {
      out << "note: r=" << format("%.2f", r.ratio) << " published count " << format("%.2f", r.published->params_millions)
          << "M is not reproduced by proportional tail skipping with ceil(r*n) kept blocks per group (computed "
          << format_params_millions(r.params) << ")\n";
    }
  }
  return out.str();
}

inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::ostringstream out;
  out << "ratio,kept_counts,params,params_millions,compression_percent\n";
  for (const auto& r : rows)
    out << format("%.4g", r.ratio) << "," << join_counts(r.kept_counts, ";") << "," << r.params << ","
        << format("%.2f", r.params / 1e6) << "," << format("%.2f", r.compression * 100) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

inline std::string run_manifest(std::size_t num_classes, std::size_t input_side) {
  const auto m = build_resnet152(num_classes, input_side);
  return to_json_value(m).dump(2) + "\n";
}

inline NetworkManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  return manifest_from_json(j);
}

inline HardwareProfile load_hardware_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  try {
    return hardware_profile_from_json(j);
  } catch (const ArgumentError& e) {
    throw ParseError(path, 0, e.what());
  }
}

// ---------------------------------------------------------------------------
// plan / sweep
// ---------------------------------------------------------------------------

struct NetworkArgs {
  std::optional<std::string> manifest_path;
  std::size_t num_classes = 10;
  std::size_t input_side = 32;

  NetworkManifest load() const {
    return manifest_path ? load_manifest(*manifest_path) : build_resnet152(num_classes, input_side);
  }
};

struct PlanArgs {
  std::string profile_path;
  std::string accuracy_path;
  double gamma = 0.0;
  std::optional<double> d_max_s;
  std::optional<std::vector<double>> ratios;
  std::optional<double> r_min;
  bool continuous_r = false;
  NetworkArgs network;
};

inline ProblemSpec build_problem(const std::string& profile_path, const std::string& accuracy_path, double gamma,
                                 std::optional<double> d_max_s, const std::optional<std::vector<double>>& ratios,
                                 std::optional<double> r_min, const NetworkArgs& network) {
  ProblemSpec p;
  p.hardware = load_hardware_profile(profile_path);
  p.accuracy = load_accuracy_csv(accuracy_path);
  p.work_fn = make_work_fn(network.load());
  p.gamma = gamma;
  p.d_max_s = d_max_s;
  if (ratios) {
    p.r_grid = *ratios;
  } else {
    p.r_grid.clear();
    for (const auto& pt : p.accuracy.points()) p.r_grid.push_back(pt.ratio);
  }
  p.r_min = r_min.value_or(*std::min_element(p.r_grid.begin(), p.r_grid.end()));
  return p;
}

inline std::string render_plan(const PlanResult& r) {
  std::ostringstream out;
  out << "ratio       " << format("%.4g", r.ratio) << "\n";
  out << "frequency   " << format_mhz(r.f_hz) << "\n";
  out << "latency     " << format_ms(r.eval.latency_s) << "\n";
  out << "energy      " << format_mj(r.eval.energy_j) << "\n";
  out << "edp         " << format_edp(r.eval.edp_js) << "\n";
  out << "power       " << format("%.3f", r.eval.avg_power_w) << " W\n";
  out << "accuracy    " << format_percent(r.accuracy) << "\n";
  out << "binding     ";
  if (r.binding.empty()) out << "none";
  for (std::size_t i = 0; i < r.binding.size(); ++i) out << (i ? "," : "") << to_string(r.binding[i]);
  out << "\n";
  return out.str();
}

inline PlanResult run_plan(const PlanArgs& a) {
  auto p = build_problem(a.profile_path, a.accuracy_path, a.gamma, a.d_max_s, a.ratios, a.r_min, a.network);
  p.continuous_r = a.continuous_r;
  return solve(p);
}

struct SweepArgs {
  std::string profile_path;
  std::string accuracy_path;
  std::size_t f_steps = 32;
  std::optional<std::vector<double>> ratios;
  NetworkArgs network;
  unsigned threads = 0;
};

inline std::string run_sweep(const SweepArgs& a) {
  const auto p = build_problem(a.profile_path, a.accuracy_path, 0.0, std::nullopt, a.ratios, std::nullopt, a.network);
  std::ostringstream out;
  write_sweep_csv(out, sweep(p, a.f_steps, a.threads));
  return out.str();
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string trace_path;
  std::optional<std::string> work_path;  // default: MACs of the network per trace ratio
  FitOptions fit;
  NetworkArgs network;
};

inline std::string work_csv(const WorkByRatio& work) {
  std::ostringstream out;
  out << "ratio,macs\n";
  for (const auto& [r, w] : work) out << format("%.6g", r) << "," << format("%.17g", w) << "\n";
  return out.str();
}

inline WorkByRatio network_work(const NetworkManifest& m, const std::vector<double>& ratios) {
  WorkByRatio w;
  const auto fn = make_work_fn(m);
  for (double r : ratios) w.emplace(r, fn(r));
  return w;
}

inline FitResult run_calibrate(const CalibrateArgs& a) {
  const auto rows = load_trace_csv(a.trace_path);
  WorkByRatio work;
  if (a.work_path) {
    work = load_work_csv(*a.work_path);
  } else {
    std::vector<double> ratios;
    for (const auto& r : rows) ratios.push_back(r.ratio);
    work = network_work(a.network.load(), ratios);
  }
  return fit_hardware_profile(rows, work, a.fit);
}

inline std::string render_fit(const FitResult& fit) {
  std::ostringstream out;
  const auto& p = fit.profile;
  out << "label       " << p.label << "\n";
  out << "theta       " << format("%.6g", p.theta) << " MACs/cycle\n";
  out << "knee        " << format_mhz(p.vf.f_knee_hz) << (fit.report.knee_identified ? "" : " (from hint)") << "\n";
  out << "alpha_c     " << format("%.6g", p.alpha_c) << "\n";
  out << "k_slope     " << format("%.6g", p.vf.k_slope) << " Hz/V\n";
  out << "p_static    " << format("%.6g", p.p_static_w) << " W\n";
  out << "max resid   " << format("%.3g", fit.report.max_rel_residual * 100) << " %\n";
  return out.str();
}

}  // namespace lsfs
