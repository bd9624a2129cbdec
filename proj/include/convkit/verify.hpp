#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "convkit/model.hpp"
#include "convkit/rng.hpp"

namespace convkit {

struct Divergence {
  std::size_t inputs = 0;
  double max_abs_diff = 0.0;
  /// Mean over inputs of ||a - b||_2 / ||a||_2 (0 when both are zero).
  double mean_rel_diff = 0.0;
  /// Percentage of inputs whose argmax output matches.
  double top1_agreement = 100.0;
};

/// Fills a map of the given shape with uniform [-1, 1] draws in row-major
/// order.
FeatureMap random_input(const Shape3& shape, Rng& rng);

/// Runs both models on `inputs` random maps drawn from one Rng(seed) stream.
Divergence verify_models(const ModelGraph& a, const ModelGraph& b,
                         std::size_t inputs, std::uint64_t seed);
Divergence verify_networks(const Network& a, const Network& b, std::size_t inputs,
                           std::uint64_t seed);

std::string divergence_json(const Divergence& d);

}  // namespace convkit
