#pragma once

#include <cstddef>
#include <vector>

#include "convkit/tensor.hpp"

namespace convkit {

/// Thin SVD m = u * diag(sigma) * vt with k = min(rows, cols).
/// sigma is non-increasing; the largest-magnitude entry of every u column is
/// non-negative (first such entry on ties), with vt rows flipped to match.
struct SvdResult {
  Matrix u;                   // rows x k
  std::vector<float> sigma;   // k
  Matrix vt;                  // k x cols
};

struct TruncatedSvd {
  Matrix u;                   // rows x r
  std::vector<float> sigma;   // r
  Matrix vt;                  // r x cols
};

/// Throws numeric errors on non-finite input or if the solver fails to
/// converge (the message carries the reconstruction residual).
SvdResult svd(const Matrix& m);

/// Keeps the leading r singular triplets. Requires 1 <= r <= k.
TruncatedSvd svd_truncate(const SvdResult& s, std::size_t r);

/// sqrt(sum_{t >= r} sigma_t^2), the Eckart-Young error of a rank-r
/// truncation.
double tail_energy(const std::vector<float>& sigma, std::size_t r);

/// u * diag(sigma) * vt, accumulated in double.
Matrix compose(const Matrix& u, const std::vector<float>& sigma, const Matrix& vt);

}  // namespace convkit
