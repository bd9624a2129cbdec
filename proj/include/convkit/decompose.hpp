#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "convkit/conv.hpp"
#include "convkit/tensor.hpp"

namespace convkit {

enum class Scheme { dac, channel, spatial };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view s);

/// Depthwise + pointwise replacement of one conv layer.
struct DecomposedPair {
  DepthwiseWeights depthwise;
  PointwiseWeights pointwise;
  std::size_t rank = 0;
  double reconstruction_error = 0.0;  // ||T - reconstruct(pair)||_F
};

/// Thin conv with c' filters followed by a 1x1 mixing layer.
struct ChannelPair {
  ConvWeights first;        // (c', k_w, k_h, c)
  PointwiseWeights second;  // (n, 1, 1, c')
  double reconstruction_error = 0.0;
};

/// Horizontal (k_w x 1) filter bank followed by a vertical (1 x k_h) one.
struct SpatialPair {
  ConvWeights horizontal;  // (c', k_w, 1, c)
  ConvWeights vertical;    // (n, 1, k_h, c')
  double reconstruction_error = 0.0;
};

std::size_t dac_max_rank(const Tensor4::Dims& shape);
std::size_t channel_max_rank(const Tensor4::Dims& shape);
std::size_t spatial_max_rank(const Tensor4::Dims& shape);
std::size_t max_rank(Scheme scheme, const Tensor4::Dims& shape);

/// Per-input-channel truncated SVD of the layer weights. For channel i the
/// (n, k_w*k_h) slab M_i is approximated by (U_r * S_r) * V_r; rows of V_r
/// become depthwise kernels i*r + t and columns of U_r * S_r become pointwise
/// input channels i*r + t. Bias moves to the pointwise layer; stride and
/// padding stay with the depthwise layer.
DecomposedPair dac_decompose(const ConvWeights& layer, std::size_t rank);

/// T_hat[j, x, y, i] = sum_t Ts[j, 0, 0, i*r + t] * Td[i*r + t, x, y, 0].
Tensor4 reconstruct(const DecomposedPair& pair);

/// Data-free channel decomposition: truncated SVD of the
/// (k_w*k_h*c, n) matricization B[(x*k_h + y)*c + i, j] = T[j, x, y, i].
ChannelPair channel_decompose(const ConvWeights& layer, std::size_t filters);
Tensor4 reconstruct(const ChannelPair& pair);

/// Data-free spatial decomposition: truncated SVD of the (k_w*c, k_h*n)
/// matricization A[x*c + i, y*n + j] = T[j, x, y, i].
/// The horizontal layer takes the width stride/padding, the vertical layer
/// the height stride/padding, which keeps output extents unchanged.
SpatialPair spatial_decompose(const ConvWeights& layer, std::size_t filters);
Tensor4 reconstruct(const SpatialPair& pair);

/// Filter count for the channel or spatial scheme that matches the MAC cost
/// of DAC at `rank`, rounded half-up and clamped to [1, max_rank].
std::size_t match_rank(const Tensor4::Dims& shape, std::size_t rank, Scheme target);

}  // namespace convkit
