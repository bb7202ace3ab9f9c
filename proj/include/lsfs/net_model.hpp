#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsfs/errors.hpp"
#include "lsfs/skip_plan.hpp"

namespace lsfs {

enum class LayerKind { conv, batchnorm_affine, fully_connected, pool };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm_affine: return "batchnorm-affine";
    case LayerKind::fully_connected: return "fully-connected";
    case LayerKind::pool: return "pool";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "batchnorm-affine") return LayerKind::batchnorm_affine;
  if (s == "fully-connected") return LayerKind::fully_connected;
  if (s == "pool") return LayerKind::pool;
  throw ParseError("manifest", 0, "unknown layer kind '" + std::string(s) + "'");
}

// A pool with kernel_side == 0 is a global pool (spatial side collapses to 1).
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_side = 1;
  std::size_t stride = 1;

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1) {
    return {LayerKind::conv, in, out, k, stride};
  }
  static LayerSpec batchnorm(std::size_t channels) { return {LayerKind::batchnorm_affine, channels, channels, 1, 1}; }
  static LayerSpec fully_connected(std::size_t in, std::size_t out) {
    return {LayerKind::fully_connected, in, out, 1, 1};
  }
  static LayerSpec pool(std::size_t channels, std::size_t k, std::size_t stride) {
    return {LayerKind::pool, channels, channels, k, stride};
  }
  static LayerSpec global_pool(std::size_t channels) { return {LayerKind::pool, channels, channels, 0, 1}; }

  bool is_global_pool() const { return kind == LayerKind::pool && kernel_side == 0; }

  // Conv weights carry no bias; batchnorm counts its affine pair only (no running statistics).
  std::uint64_t params() const {
    switch (kind) {
      case LayerKind::conv:
        return std::uint64_t{kernel_side} * kernel_side * in_channels * out_channels;
      case LayerKind::batchnorm_affine:
        return 2 * std::uint64_t{out_channels};
      case LayerKind::fully_connected:
        return std::uint64_t{in_channels} * out_channels + out_channels;
      case LayerKind::pool:
        return 0;
    }
    return 0;
  }

  // Same padding (kernel_side / 2), floor division by stride.
  std::size_t output_side(std::size_t in_side) const {
    switch (kind) {
      case LayerKind::conv:
      case LayerKind::pool: {
        if (is_global_pool()) return 1;
        const std::size_t pad = kernel_side / 2;
        return (in_side + 2 * pad - kernel_side) / stride + 1;
      }
      case LayerKind::batchnorm_affine:
      case LayerKind::fully_connected:
        return in_side;
    }
    return in_side;
  }

  std::uint64_t macs(std::size_t in_side) const {
    switch (kind) {
      case LayerKind::conv: {
        const std::uint64_t out = output_side(in_side);
        return std::uint64_t{kernel_side} * kernel_side * in_channels * out_channels * out * out;
      }
      case LayerKind::fully_connected:
        return std::uint64_t{in_channels} * out_channels;
      default:
        return 0;
    }
  }

  bool operator==(const LayerSpec&) const = default;
};

/// Residual block. `layers` is the residual branch; `projection` is the strided
/// shortcut (1x1 conv + batchnorm) present only when the block changes shape.
struct BlockSpec {
  std::vector<LayerSpec> layers;
  std::vector<LayerSpec> projection;
  std::size_t stride = 1;

  std::size_t in_channels() const { return layers.front().in_channels; }
  std::size_t out_channels() const { return layers.back().out_channels; }
  bool has_projection() const { return !projection.empty(); }

  std::uint64_t params() const {
    std::uint64_t n = 0;
    for (const auto& l : layers) n += l.params();
    for (const auto& l : projection) n += l.params();
    return n;
  }

  std::size_t output_side(std::size_t in_side) const {
    for (const auto& l : layers) in_side = l.output_side(in_side);
    return in_side;
  }

  std::uint64_t macs(std::size_t in_side) const {
    std::uint64_t n = 0;
    std::size_t side = in_side;
    for (const auto& l : layers) {
      n += l.macs(side);
      side = l.output_side(side);
    }
    side = in_side;
    for (const auto& l : projection) {
      n += l.macs(side);
      side = l.output_side(side);
    }
    return n;
  }

  bool operator==(const BlockSpec&) const = default;
};

struct GroupSpec {
  std::size_t index = 0;
  std::vector<BlockSpec> blocks;

  bool operator==(const GroupSpec&) const = default;
};

struct NetworkManifest {
  std::vector<LayerSpec> stem;
  std::vector<GroupSpec> groups;
  std::vector<LayerSpec> head;
  std::size_t num_classes = 0;
  std::size_t input_side = 0;

  std::vector<std::size_t> group_sizes() const {
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.blocks.size());
    return sizes;
  }

  std::size_t total_blocks() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.blocks.size();
    return n;
  }

  bool operator==(const NetworkManifest&) const = default;
};

struct WorkSummary {
  std::uint64_t trainable_params = 0;
  std::uint64_t macs = 0;
};

namespace detail {

inline void require_positive_counts(const LayerSpec& l, const std::string& where) {
  if (l.kind == LayerKind::conv || l.kind == LayerKind::fully_connected) {
    if (l.in_channels == 0 || l.out_channels == 0 || l.kernel_side == 0 || l.stride == 0)
      throw StructureError(where + ": conv/fully-connected counts must be >= 1");
  }
  if (l.stride == 0) throw StructureError(where + ": stride must be >= 1");
}

inline void check_chain(const std::vector<LayerSpec>& layers, const std::string& where) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    require_positive_counts(layers[i], where + " layer " + std::to_string(i));
    if (i > 0 && layers[i].in_channels != layers[i - 1].out_channels)
      throw StructureError(where + ": channel mismatch at layer " + std::to_string(i));
  }
}

}  // namespace detail

/// Check channel chaining, projection placement and the group partition rules.
/// Throws StructureError on the first violation.
inline void validate(const NetworkManifest& m) {
  if (m.num_classes == 0) throw StructureError("manifest: num_classes must be >= 1");
  if (m.input_side == 0) throw StructureError("manifest: input_side must be >= 1");
  detail::check_chain(m.stem, "stem");
  detail::check_chain(m.head, "head");
  std::size_t side = m.input_side;
  for (const auto& l : m.stem) side = l.output_side(side);
  std::size_t channels = m.stem.empty() ? 0 : m.stem.back().out_channels;
  for (std::size_t j = 0; j < m.groups.size(); ++j) {
    const auto& g = m.groups[j];
    const std::string gname = "group " + std::to_string(j);
    if (g.blocks.empty()) throw StructureError(gname + " is empty");
    for (std::size_t k = 0; k < g.blocks.size(); ++k) {
      const auto& b = g.blocks[k];
      const std::string bname = gname + " block " + std::to_string(k);
      if (b.layers.empty()) throw StructureError(bname + " has no layers");
      detail::check_chain(b.layers, bname);
      detail::check_chain(b.projection, bname + " projection");
      if (channels != 0 && b.in_channels() != channels)
        throw StructureError(bname + ": input channels do not match previous output");
      const std::size_t out_side = b.output_side(side);
      const bool shape_changes = b.in_channels() != b.out_channels() || out_side != side;
      if (shape_changes != b.has_projection())
        throw StructureError(bname + ": projection must be present exactly when the block changes shape");
      if (k > 0 && shape_changes)
        throw StructureError(bname + ": only the first block of a group may change shape");
      if (b.has_projection()) {
        if (b.projection.front().in_channels != b.in_channels() ||
            b.projection.back().out_channels != b.out_channels())
          throw StructureError(bname + ": projection channels do not match the block");
        std::size_t pside = side;
        for (const auto& l : b.projection) pside = l.output_side(pside);
        if (pside != out_side) throw StructureError(bname + ": projection output side differs from the branch");
      }
      channels = b.out_channels();
      side = out_side;
    }
  }
  if (!m.head.empty() && channels != 0 && m.head.front().in_channels != channels)
    throw StructureError("head: input channels do not match the last block");
  if (!m.head.empty() && m.head.back().out_channels != m.num_classes)
    throw StructureError("head: output width differs from num_classes");
}

/// ResNet-152: 7x7/2 stem conv + batchnorm + 3x3/2 max-pool, bottleneck groups
/// [3, 8, 36, 3] of widths 64..512 with expansion 4, global average pool and a
/// fully-connected classifier.
inline NetworkManifest build_resnet152(std::size_t num_classes, std::size_t input_side) {
  if (num_classes < 1) throw ArgumentError("num_classes must be >= 1");
  if (input_side < 8) throw ArgumentError("input_side must be >= 8, got " + std::to_string(input_side));

  constexpr std::size_t kExpansion = 4;
  const std::size_t group_sizes[] = {3, 8, 36, 3};
  const std::size_t widths[] = {64, 128, 256, 512};

  NetworkManifest m;
  m.num_classes = num_classes;
  m.input_side = input_side;
  m.stem = {LayerSpec::conv(3, 64, 7, 2), LayerSpec::batchnorm(64), LayerSpec::pool(64, 3, 2)};

  std::size_t in = 64;
  for (std::size_t j = 0; j < 4; ++j) {
    GroupSpec g;
    g.index = j;
    const std::size_t w = widths[j];
    const std::size_t out = w * kExpansion;
    for (std::size_t k = 0; k < group_sizes[j]; ++k) {
      BlockSpec b;
      b.stride = (k == 0 && j > 0) ? 2 : 1;
      b.layers = {LayerSpec::conv(in, w, 1),          LayerSpec::batchnorm(w),
                  LayerSpec::conv(w, w, 3, b.stride), LayerSpec::batchnorm(w),
                  LayerSpec::conv(w, out, 1),         LayerSpec::batchnorm(out)};
      if (k == 0) b.projection = {LayerSpec::conv(in, out, 1, b.stride), LayerSpec::batchnorm(out)};
      g.blocks.push_back(std::move(b));
      in = out;
    }
    m.groups.push_back(std::move(g));
  }
  m.head = {LayerSpec::global_pool(in), LayerSpec::fully_connected(in, num_classes)};
  return m;
}

/// Throws StructureError unless `plan` has one gate per block of `m` and keeps
/// the first (shape-changing) block of every group.
inline void check_plan(const NetworkManifest& m, const SkipPlan& plan) {
  if (plan.gates.size() != m.groups.size() || plan.kept_counts.size() != m.groups.size())
    throw StructureError("skip plan has " + std::to_string(plan.gates.size()) + " groups, manifest has " +
                         std::to_string(m.groups.size()));
  for (std::size_t j = 0; j < m.groups.size(); ++j) {
    if (plan.gates[j].size() != m.groups[j].blocks.size())
      throw StructureError("skip plan group " + std::to_string(j) + " has " + std::to_string(plan.gates[j].size()) +
                           " gates, manifest has " + std::to_string(m.groups[j].blocks.size()) + " blocks");
    if (!plan.gates[j].empty() && !plan.gates[j].front())
      throw StructureError("skip plan skips the first block of group " + std::to_string(j));
  }
}

inline std::uint64_t count_params(const NetworkManifest& m, const SkipPlan* plan = nullptr) {
  if (plan) check_plan(m, *plan);
  std::uint64_t n = 0;
  for (const auto& l : m.stem) n += l.params();
  for (std::size_t j = 0; j < m.groups.size(); ++j)
    for (std::size_t k = 0; k < m.groups[j].blocks.size(); ++k)
      if (!plan || plan->keeps(j, k)) n += m.groups[j].blocks[k].params();
  for (const auto& l : m.head) n += l.params();
  return n;
}

inline std::uint64_t count_params(const NetworkManifest& m, const SkipPlan& plan) { return count_params(m, &plan); }

/// Multiply-accumulates for one input frame; skipped blocks pass the feature map
/// through unchanged.
inline std::uint64_t count_macs(const NetworkManifest& m, const SkipPlan* plan = nullptr) {
  if (plan) check_plan(m, *plan);
  std::uint64_t n = 0;
  std::size_t side = m.input_side;
  for (const auto& l : m.stem) {
    n += l.macs(side);
    side = l.output_side(side);
  }
  for (std::size_t j = 0; j < m.groups.size(); ++j) {
    for (std::size_t k = 0; k < m.groups[j].blocks.size(); ++k) {
      if (plan && !plan->keeps(j, k)) continue;
      const auto& b = m.groups[j].blocks[k];
      n += b.macs(side);
      side = b.output_side(side);
    }
  }
  for (const auto& l : m.head) {
    n += l.macs(side);
    side = l.output_side(side);
  }
  return n;
}

inline std::uint64_t count_macs(const NetworkManifest& m, const SkipPlan& plan) { return count_macs(m, &plan); }

inline WorkSummary summarize(const NetworkManifest& m, const SkipPlan* plan = nullptr) {
  return {count_params(m, plan), count_macs(m, plan)};
}

// ---------------------------------------------------------------------------
// JSON manifest format
// ---------------------------------------------------------------------------

inline nlohmann::json to_json_value(const LayerSpec& l) {
  return {{"kind", std::string(to_string(l.kind))},
          {"in_channels", l.in_channels},
          {"out_channels", l.out_channels},
          {"kernel_side", l.kernel_side},
          {"stride", l.stride}};
}

inline nlohmann::json to_json_value(const std::vector<LayerSpec>& layers) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& l : layers) a.push_back(to_json_value(l));
  return a;
}

/// Export format: `stem`, `groups` (list of block lists), `head`, `num_classes`,
/// `input_side`, plus a derived `summary` that import ignores.
inline nlohmann::json to_json_value(const NetworkManifest& m) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : m.groups) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : g.blocks) {
      nlohmann::json jb = {{"layers", to_json_value(b.layers)}, {"stride", b.stride}};
      jb["projection"] = b.has_projection() ? to_json_value(b.projection) : nlohmann::json(nullptr);
      blocks.push_back(std::move(jb));
    }
    groups.push_back(std::move(blocks));
  }
  const auto params = count_params(m);
  const auto macs = count_macs(m);
  nlohmann::json j;
  j["num_classes"] = m.num_classes;
  j["input_side"] = m.input_side;
  j["stem"] = to_json_value(m.stem);
  j["groups"] = std::move(groups);
  j["head"] = to_json_value(m.head);
  j["summary"] = {{"trainable_params", params},
                  {"params_millions", static_cast<double>(static_cast<std::uint64_t>(params / 1e4 + 0.5)) / 100.0},
                  {"macs", macs},
                  {"group_sizes", m.group_sizes()}};
  return j;
}

namespace detail {

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  l.in_channels = j.at("in_channels").get<std::size_t>();
  l.out_channels = j.at("out_channels").get<std::size_t>();
  l.kernel_side = j.value("kernel_side", std::size_t{1});
  l.stride = j.value("stride", std::size_t{1});
  return l;
}

inline std::vector<LayerSpec> layers_from_json(const nlohmann::json& j) {
  std::vector<LayerSpec> out;
  for (const auto& x : j) out.push_back(layer_from_json(x));
  return out;
}

}  // namespace detail

inline NetworkManifest manifest_from_json(const nlohmann::json& j) {
  NetworkManifest m;
  try {
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.input_side = j.at("input_side").get<std::size_t>();
    m.stem = detail::layers_from_json(j.at("stem"));
    m.head = detail::layers_from_json(j.at("head"));
    std::size_t index = 0;
    for (const auto& jg : j.at("groups")) {
      GroupSpec g;
      g.index = index++;
      for (const auto& jb : jg) {
        BlockSpec b;
        b.layers = detail::layers_from_json(jb.at("layers"));
        b.stride = jb.value("stride", std::size_t{1});
        if (jb.contains("projection") && !jb.at("projection").is_null())
          b.projection = detail::layers_from_json(jb.at("projection"));
        g.blocks.push_back(std::move(b));
      }
      m.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest", 0, e.what());
  }
  validate(m);
  return m;
}

}  // namespace lsfs
