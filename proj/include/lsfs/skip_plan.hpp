#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsfs/errors.hpp"

namespace lsfs {

/// Per-block gates for one remaining-layer ratio.
///
/// gates[j][k] is 1 when block k of group j executes its residual branch and 0
/// when the block collapses to the identity shortcut. Within every group the
/// gates form a prefix of 1s followed by 0s, so kept_counts[j] fully determines
/// gates[j].
struct SkipPlan {
  double ratio = 1.0;
  std::vector<std::vector<std::uint8_t>> gates;
  std::vector<std::size_t> kept_counts;

  bool keeps(std::size_t group, std::size_t block) const { return gates.at(group).at(block) != 0; }

  std::size_t total_blocks() const {
    std::size_t n = 0;
    for (const auto& g : gates) n += g.size();
    return n;
  }

  std::size_t total_kept() const {
    std::size_t n = 0;
    for (auto k : kept_counts) n += k;
    return n;
  }
};

inline nlohmann::json to_json_value(const SkipPlan& plan) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : plan.gates) {
    nlohmann::json row = nlohmann::json::array();
    for (auto v : g) row.push_back(static_cast<int>(v));
    gates.push_back(std::move(row));
  }
  return {{"ratio", plan.ratio}, {"kept_counts", plan.kept_counts}, {"gates", std::move(gates)}};
}

inline SkipPlan skip_plan_from_json(const nlohmann::json& j) {
  SkipPlan plan;
  try {
    plan.ratio = j.at("ratio").get<double>();
    plan.kept_counts = j.at("kept_counts").get<std::vector<std::size_t>>();
    for (const auto& row : j.at("gates")) {
      std::vector<std::uint8_t> g;
      for (const auto& v : row) {
        int x = v.get<int>();
        if (x != 0 && x != 1) throw StructureError("gate values must be 0 or 1");
        g.push_back(static_cast<std::uint8_t>(x));
      }
      plan.gates.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("skip plan", 0, e.what());
  }
  if (plan.gates.size() != plan.kept_counts.size())
    throw StructureError("skip plan: gates and kept_counts disagree on group count");
  for (std::size_t j = 0; j < plan.gates.size(); ++j) {
    const auto& g = plan.gates[j];
    std::size_t ones = 0;
    bool seen_zero = false;
    for (auto v : g) {
      if (v) {
        if (seen_zero) throw StructureError("skip plan: gates of group " + std::to_string(j) + " are not a prefix of 1s");
        ++ones;
      } else {
        seen_zero = true;
      }
    }
    if (ones != plan.kept_counts[j])
      throw StructureError("skip plan: kept_counts[" + std::to_string(j) + "] does not match its gates");
  }
  return plan;
}

}  // namespace lsfs
