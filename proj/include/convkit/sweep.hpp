#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "convkit/decompose.hpp"
#include "convkit/model.hpp"

namespace convkit {

enum class SweepDirection { single_layer, front_to_back, back_to_front };

SweepDirection parse_direction(std::string_view s);
std::string_view to_string(SweepDirection d);

/// Ablation sweep. In single_layer mode each layer in `layers` is decomposed
/// on its own; otherwise the first (front_to_back) or last (back_to_front)
/// `layer_counts[k]` conv2d layers are decomposed together. Ranks are DAC
/// ranks; the channel and spatial schemes use the MAC-matched filter count.
/// A rank above a layer's maximum is clamped to it.
struct SweepConfig {
  Scheme scheme = Scheme::dac;
  std::vector<std::size_t> ranks;
  SweepDirection direction = SweepDirection::single_layer;
  std::vector<std::size_t> layer_counts;
  std::vector<std::string> layers;
  std::size_t inputs = 10;
  std::uint64_t seed = 0;

  void validate(const ModelGraph& model) const;
};

struct SweepRow {
  std::string layers;   // layer name, or "first:K" / "last:K"
  std::size_t layer_count = 0;
  std::size_t rank = 0;
  double saved_ratio = 0.0;
  double frobenius_error = 0.0;
  double divergence = 0.0;   // max abs output difference
  double top1_agreement = 0.0;
};

/// Rows ordered by rank, then by layer / layer count, as listed in the config.
std::vector<SweepRow> run_sweep(const ModelGraph& model, const SweepConfig& config);

inline constexpr std::string_view kSweepCsvHeader =
    "layers,layer_count,rank,saved_ratio,frobenius_error,divergence,top1_agreement";

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace convkit
