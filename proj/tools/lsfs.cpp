#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lsfs/commands.hpp"

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lsfs::ParseError(path, 0, "cannot open file for writing");
  out << text;
  if (!out) throw lsfs::ParseError(path, 0, "write failed");
}

void add_network_flags(CLI::App* cmd, lsfs::NetworkArgs& net) {
  cmd->add_option("--manifest", net.manifest_path, "Network manifest JSON (default: ResNet-152)");
  cmd->add_option("--classes", net.num_classes, "Classifier width for the built-in ResNet-152")->capture_default_str();
  cmd->add_option("--input-side", net.input_side, "Input resolution for the built-in ResNet-152")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-skipping ratio and DVFS frequency planner for residual CNN inference"};
  app.require_subcommand(1);

  // manifest
  std::size_t classes = 10, input_side = 32;
  std::string manifest_out;
  auto* manifest = app.add_subcommand("manifest", "Write the ResNet-152 manifest as JSON");
  manifest->add_option("--classes", classes)->capture_default_str();
  manifest->add_option("--input-side", input_side)->capture_default_str();
  manifest->add_option("-o,--output", manifest_out, "Output file")->required();

  // table1
  std::string table_ratios = "1.0,0.9,0.8,0.7,0.5,0.3,0.1";
  std::string table_csv;
  std::size_t table_classes = 10;
  auto* table1 = app.add_subcommand("table1", "Parameter counts and compression rates per skip ratio");
  table1->add_option("--ratios", table_ratios, "Comma-separated ratios in (0, 1]")->capture_default_str();
  table1->add_option("--classes", table_classes)->capture_default_str();
  table1->add_option("--csv", table_csv, "Also write the rows as CSV");

  // calibrate
  lsfs::CalibrateArgs cal;
  std::string cal_out, cal_report, cal_work;
  auto* calibrate = app.add_subcommand("calibrate", "Fit a hardware profile to a measurement trace");
  calibrate->add_option("--trace", cal.trace_path, "Trace CSV")->required();
  calibrate->add_option("--work", cal_work, "Work CSV (ratio,macs); default: network MACs");
  calibrate->add_option("-o,--output", cal_out, "Profile JSON to write")->required();
  calibrate->add_option("--report", cal_report, "Fit report JSON to write");
  calibrate->add_option("--knee-hint", cal.fit.knee_hint_hz, "V/F knee guess in Hz, used when the trace cannot pin it");
  calibrate->add_option("--v-min", cal.fit.v_min, "Voltage gauge for the low-power zone")->capture_default_str();
  calibrate->add_option("--f-min", cal.fit.f_min_hz, "Profile f_min in Hz (default: lowest traced)");
  calibrate->add_option("--f-max", cal.fit.f_max_hz, "Profile f_max in Hz (default: highest traced)");
  calibrate->add_option("--label", cal.fit.label, "Profile label (default: trace device)");
  add_network_flags(calibrate, cal.network);

  // plan
  lsfs::PlanArgs plan;
  std::string plan_ratios;
  auto* plan_cmd = app.add_subcommand("plan", "Choose the skip ratio and frequency minimizing EDP");
  plan_cmd->add_option("--profile", plan.profile_path, "Hardware profile JSON")->required();
  plan_cmd->add_option("--accuracy", plan.accuracy_path, "Accuracy CSV (ratio,accuracy)")->required();
  plan_cmd->add_option("--gamma", plan.gamma, "Retained-accuracy floor (fraction)")->required();
  plan_cmd->add_option("--d-max", plan.d_max_s, "Latency budget in seconds");
  plan_cmd->add_option("--ratios", plan_ratios, "Admissible ratios (default: accuracy file knots)");
  plan_cmd->add_option("--r-min", plan.r_min, "Smallest admissible ratio");
  plan_cmd->add_flag("--continuous-r", plan.continuous_r, "Plan over interpolated accuracy instead of the grid");
  add_network_flags(plan_cmd, plan.network);

  // sweep
  lsfs::SweepArgs sw;
  std::string sweep_ratios, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate every (ratio, frequency) pair to CSV");
  sweep_cmd->add_option("--profile", sw.profile_path, "Hardware profile JSON")->required();
  sweep_cmd->add_option("--accuracy", sw.accuracy_path, "Accuracy CSV (ratio,accuracy)")->required();
  sweep_cmd->add_option("--f-steps", sw.f_steps, "Frequency grid points")->required();
  sweep_cmd->add_option("--ratios", sweep_ratios, "Ratios to sweep (default: accuracy file knots)");
  sweep_cmd->add_option("--threads", sw.threads, "Worker threads (0: hardware concurrency)");
  sweep_cmd->add_option("-o,--output", sweep_out, "Sweep CSV to write")->required();
  add_network_flags(sweep_cmd, sw.network);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lsfs::kExitArgument;
  }

  try {
    if (*manifest) {
      write_file(manifest_out, lsfs::run_manifest(classes, input_side));
      const auto m = lsfs::build_resnet152(classes, input_side);
      std::cout << "params " << lsfs::format_params_millions(lsfs::count_params(m)) << "\n";
    } else if (*table1) {
      const auto rows = lsfs::run_table1(lsfs::parse_ratio_list(table_ratios), table_classes);
      std::cout << lsfs::render_table1(rows);
      if (!table_csv.empty()) write_file(table_csv, lsfs::table1_csv(rows));
    } else if (*calibrate) {
      if (!cal_work.empty()) cal.work_path = cal_work;
      const auto fit = lsfs::run_calibrate(cal);
      write_file(cal_out, lsfs::to_json_value(fit.profile).dump(2) + "\n");
      if (!cal_report.empty()) write_file(cal_report, lsfs::to_json_value(fit.report).dump(2) + "\n");
      std::cout << lsfs::render_fit(fit);
    } else if (*plan_cmd) {
      if (!plan_ratios.empty()) plan.ratios = lsfs::parse_ratio_list(plan_ratios);
      std::cout << lsfs::render_plan(lsfs::run_plan(plan));
    } else if (*sweep_cmd) {
      if (!sweep_ratios.empty()) sw.ratios = lsfs::parse_ratio_list(sweep_ratios);
      write_file(sweep_out, lsfs::run_sweep(sw));
    }
  } catch (...) {
    std::string message;
    const int code = lsfs::exit_code_for_current_exception(message);
    std::cerr << message << "\n";
    return code;
  }
  return lsfs::kExitOk;
}
