#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "convkit/decompose.hpp"
#include "convkit/model.hpp"

namespace convkit {

/// Rank value meaning "the scheme's maximum rank for this layer".
inline constexpr std::size_t kFullRank = 0;

struct PlanEntry {
  std::string layer;
  Scheme scheme = Scheme::dac;
  std::size_t rank = kFullRank;  // DAC rank, or c' for channel/spatial

  bool operator==(const PlanEntry&) const = default;
};

struct DecompositionPlan {
  std::vector<PlanEntry> entries;
  std::vector<std::string> skip;  // layers explicitly left untouched

  /// Throws validation errors: unknown layer, non-conv2d layer, duplicate
  /// entry, entry on a skipped layer, or rank out of scheme bounds.
  void validate(const ModelGraph& model) const;
};

struct LayerReport {
  std::string name;
  Scheme scheme = Scheme::dac;
  std::size_t rank = 0;
  double frobenius_error = 0.0;
  double relative_error = 0.0;
  std::uint64_t macs_before = 0;
  std::uint64_t macs_after = 0;
};

struct DecompositionReport {
  std::vector<LayerReport> layers;
  std::uint64_t layer_macs_before = 0;  // sums over `layers`
  std::uint64_t layer_macs_after = 0;
  std::uint64_t model_macs_before = 0;  // whole-model totals
  std::uint64_t model_macs_after = 0;

  /// 1 - model_macs_after / model_macs_before; negative when the
  /// decomposition adds work.
  double saved_ratio() const;
  /// Root-sum-square of the per-layer Frobenius errors.
  double total_frobenius_error() const;
};

/// conv2d layer names picked by a selector: "all", "all-but-first",
/// "first:K" or "last:K".
std::vector<std::string> select_conv_layers(const ModelGraph& model,
                                            std::string_view selector);

/// How a uniform plan picks ranks.
struct RankChoice {
  enum class Mode { value, full, match_dac } mode = Mode::full;
  std::size_t value = 0;  // rank / filters for `value`, DAC rank for `match_dac`
};

RankChoice parse_rank_choice(std::string_view rank);

/// Same scheme and rank rule for every selected layer. With match_dac the
/// channel/spatial filter count is derived per layer from the DAC rank.
DecompositionPlan uniform_plan(const ModelGraph& model, Scheme scheme,
                               RankChoice rank, std::string_view selector,
                               const std::vector<std::string>& skip = {});

/// Replaces every planned conv2d by its two-layer factorization, named
/// "<layer>/a" and "<layer>/b". Other layers and their tensors are untouched.
std::pair<ModelGraph, DecompositionReport> apply_plan(const ModelGraph& model,
                                                      const DecompositionPlan& plan);

DecompositionPlan parse_plan(std::string_view json_text);
std::string plan_json(const DecompositionPlan& plan);
std::string report_json(const DecompositionReport& report);

}  // namespace convkit
