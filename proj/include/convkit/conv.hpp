#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "convkit/tensor.hpp"

namespace convkit {

/// (width, height) pair used for strides, paddings and kernel extents.
struct Extent2 {
  std::size_t w = 0;
  std::size_t h = 0;
  bool operator==(const Extent2&) const = default;
};

/// Ordinary convolution: weights (n, k_w, k_h, c).
struct ConvWeights {
  Tensor4 weights;
  std::optional<std::vector<float>> bias;
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};

  std::size_t filters() const noexcept { return weights.n(); }
  std::size_t in_channels() const noexcept { return weights.c(); }
  void validate() const;
};

/// Depthwise convolution with channel multiplier r: weights (r*c, k_w, k_h, 1).
/// Output channel i*r + t is input channel i convolved with kernel i*r + t.
struct DepthwiseWeights {
  Tensor4 weights;
  std::size_t multiplier = 1;
  std::size_t channels = 0;
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};

  void validate() const;
};

/// 1x1 convolution: weights (n, 1, 1, r*c).
struct PointwiseWeights {
  Tensor4 weights;
  std::optional<std::vector<float>> bias;

  void validate() const;
};

/// Dense layer: weights (out, in) stored as Tensor4 (out, 1, 1, in).
struct DenseWeights {
  Tensor4 weights;
  std::optional<std::vector<float>> bias;

  void validate() const;
};

/// Multiply-accumulate tally with a per-layer breakdown.
class MacCounter {
 public:
  void add(std::string layer, std::uint64_t macs);
  void merge(const MacCounter& other);

  std::uint64_t total() const noexcept { return total_; }
  const std::vector<std::pair<std::string, std::uint64_t>>& breakdown() const noexcept {
    return breakdown_;
  }

 private:
  std::uint64_t total_ = 0;
  std::vector<std::pair<std::string, std::uint64_t>> breakdown_;
};

/// floor((in + 2*pad - k) / stride) + 1; throws when the kernel exceeds the
/// padded input.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               std::size_t stride, std::size_t pad);

// Forward ops. Each one adds its MACs to `counter` under `name`. Zero padding,
// cross-correlation (no kernel flip), double accumulation.

FeatureMap conv2d(const FeatureMap& input, const ConvWeights& layer,
                  MacCounter& counter, const std::string& name = "conv2d");
FeatureMap depthwise_conv(const FeatureMap& input, const DepthwiseWeights& layer,
                          MacCounter& counter, const std::string& name = "depthwise");
FeatureMap pointwise_conv(const FeatureMap& input, const PointwiseWeights& layer,
                          MacCounter& counter, const std::string& name = "pointwise");
FeatureMap dense(const FeatureMap& input, const DenseWeights& layer,
                 MacCounter& counter, const std::string& name = "dense");

FeatureMap relu(const FeatureMap& input);
/// 2x2 window, stride 2; odd trailing rows/columns are dropped.
FeatureMap maxpool2(const FeatureMap& input);
/// Reinterprets (W, H, C) as (1, 1, W*H*C) in row-major order.
FeatureMap flatten(const FeatureMap& input);

// MAC formulas used by both the forward ops and shape-only accounting.
std::uint64_t conv2d_macs(std::size_t out_w, std::size_t out_h, std::size_t c,
                          std::size_t kw, std::size_t kh, std::size_t n);
std::uint64_t depthwise_macs(std::size_t out_w, std::size_t out_h, std::size_t kw,
                             std::size_t kh, std::size_t rc);
std::uint64_t pointwise_macs(std::size_t w, std::size_t h, std::size_t rc,
                             std::size_t n);

}  // namespace convkit
