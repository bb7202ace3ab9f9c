#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include "lsfs/errors.hpp"
#include "lsfs/net_model.hpp"
#include "lsfs/skip_plan.hpp"

namespace lsfs {

/// Blocks kept in a group of n blocks at remaining-layer ratio r: ceil(r * n).
/// The small slack keeps exact products such as 0.7 * 10 from rounding up.
inline std::size_t kept_block_count(double r, std::size_t n) {
  const double exact = r * static_cast<double>(n);
  auto kept = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  if (kept < 1) kept = 1;
  if (kept > n) kept = n;
  return kept;
}

/// Proportional layer skipping: in every group keep the leading ceil(r * n_j)
/// blocks and gate off the tail.
inline SkipPlan make_skip_plan(const NetworkManifest& m, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("skip ratio must lie in (0, 1], got " + std::to_string(r));
  SkipPlan plan;
  plan.ratio = r;
  for (const auto& g : m.groups) {
    const std::size_t n = g.blocks.size();
    const std::size_t kept = n == 0 ? 0 : kept_block_count(r, n);
    std::vector<std::uint8_t> gates(n, 0);
    for (std::size_t k = 0; k < kept; ++k) gates[k] = 1;
    plan.gates.push_back(std::move(gates));
    plan.kept_counts.push_back(kept);
  }
  return plan;
}

inline double compression_rate(const NetworkManifest& m, const SkipPlan& plan) {
  const auto kept = count_params(m, &plan);
  const auto full = count_params(m);
  return 1.0 - static_cast<double>(kept) / static_cast<double>(full);
}

}  // namespace lsfs
