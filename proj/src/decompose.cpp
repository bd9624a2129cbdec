#include "convkit/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convkit/svd.hpp"

namespace convkit {
namespace {

void check_layer(const ConvWeights& layer, const char* scheme) {
  const auto& d = layer.weights.dims();
  if (d[0] == 0 || d[1] == 0 || d[2] == 0 || d[3] == 0) {
    fail_validation(std::string(scheme) + ": degenerate layer extents (" +
                    std::to_string(d[0]) + ", " + std::to_string(d[1]) + ", " +
                    std::to_string(d[2]) + ", " + std::to_string(d[3]) + ")");
  }
  layer.validate();
}

void check_rank(std::size_t rank, std::size_t max, const char* scheme) {
  if (rank < 1 || rank > max) {
    fail_validation(std::string(scheme) + ": rank " + std::to_string(rank) +
                    " outside [1, " + std::to_string(max) + "]");
  }
}

// ||target - left * right||_F with the product formed in double.
double factor_error_sq(const Matrix& target, const Matrix& left, const Matrix& right) {
  double sum = 0.0;
  for (std::size_t r = 0; r < target.rows(); ++r) {
    for (std::size_t c = 0; c < target.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < left.cols(); ++t) {
        acc += static_cast<double>(left(r, t)) * right(t, c);
      }
      const double d = target(r, c) - acc;
      sum += d * d;
    }
  }
  return sum;
}

// u * diag(sigma), the "singular values go to the second factor" convention
// expressed as the left factor of the matricization.
Matrix scale_columns(const Matrix& u, const std::vector<float>& sigma) {
  Matrix out(u.rows(), u.cols());
  for (std::size_t r = 0; r < u.rows(); ++r) {
    for (std::size_t t = 0; t < u.cols(); ++t) {
      out(r, t) = static_cast<float>(static_cast<double>(u(r, t)) * sigma[t]);
    }
  }
  return out;
}

Matrix scale_rows(const std::vector<float>& sigma, const Matrix& vt) {
  Matrix out(vt.rows(), vt.cols());
  for (std::size_t t = 0; t < vt.rows(); ++t) {
    for (std::size_t c = 0; c < vt.cols(); ++c) {
      out(t, c) = static_cast<float>(static_cast<double>(sigma[t]) * vt(t, c));
    }
  }
  return out;
}

// B[(x*kh + y)*c + i, j] = T[j, x, y, i]
Matrix channel_matrix(const Tensor4& t) {
  return transpose(reshape(t, t.n(), t.kw() * t.kh() * t.c()));
}

// A[x*c + i, y*n + j] = T[j, x, y, i]
Matrix spatial_matrix(const Tensor4& t) {
  const std::size_t n = t.n(), kw = t.kw(), kh = t.kh(), c = t.c();
  Matrix a(kw * c, kh * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t x = 0; x < kw; ++x) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t i = 0; i < c; ++i) a(x * c + i, y * n + j) = t(j, x, y, i);
      }
    }
  }
  return a;
}

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::dac: return "dac";
    case Scheme::channel: return "channel";
    case Scheme::spatial: return "spatial";
  }
  return "?";
}

Scheme parse_scheme(std::string_view s) {
  if (s == "dac") return Scheme::dac;
  if (s == "channel") return Scheme::channel;
  if (s == "spatial") return Scheme::spatial;
  fail_usage("unknown scheme '" + std::string(s) + "' (expected dac, channel or spatial)");
}

std::size_t dac_max_rank(const Tensor4::Dims& d) {
  return std::min(d[0], d[1] * d[2]);
}
std::size_t channel_max_rank(const Tensor4::Dims& d) {
  return std::min(d[0], d[1] * d[2] * d[3]);
}
std::size_t spatial_max_rank(const Tensor4::Dims& d) {
  return std::min(d[1] * d[3], d[2] * d[0]);
}
std::size_t max_rank(Scheme scheme, const Tensor4::Dims& d) {
  switch (scheme) {
    case Scheme::dac: return dac_max_rank(d);
    case Scheme::channel: return channel_max_rank(d);
    case Scheme::spatial: return spatial_max_rank(d);
  }
  return 0;
}

DecomposedPair dac_decompose(const ConvWeights& layer, std::size_t rank) {
  check_layer(layer, "dac");
  const Tensor4& t = layer.weights;
  check_rank(rank, dac_max_rank(t.dims()), "dac");

  const std::size_t n = t.n(), kw = t.kw(), kh = t.kh(), c = t.c();
  const std::size_t rc = rank * c;

  DecomposedPair pair;
  pair.rank = rank;
  pair.depthwise.weights = Tensor4({rc, kw, kh, 1});
  pair.depthwise.multiplier = rank;
  pair.depthwise.channels = c;
  pair.depthwise.stride = layer.stride;
  pair.depthwise.padding = layer.padding;
  pair.pointwise.weights = Tensor4({n, 1, 1, rc});
  pair.pointwise.bias = layer.bias;

  double error_sq = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const Matrix slab = channel_slice(t, i);
    const TruncatedSvd f = svd_truncate(svd(slab), rank);
    const Matrix pointwise = scale_columns(f.u, f.sigma);  // n x r
    error_sq += factor_error_sq(slab, pointwise, f.vt);
    for (std::size_t k = 0; k < rank; ++k) {
      const std::size_t channel = i * rank + k;
      for (std::size_t x = 0; x < kw; ++x) {
        for (std::size_t y = 0; y < kh; ++y) {
          pair.depthwise.weights(channel, x, y, 0) = f.vt(k, x * kh + y);
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        pair.pointwise.weights(j, 0, 0, channel) = pointwise(j, k);
      }
    }
  }
  pair.reconstruction_error = std::sqrt(error_sq);
  return pair;
}

Tensor4 reconstruct(const DecomposedPair& pair) {
  const Tensor4& td = pair.depthwise.weights;
  const Tensor4& ts = pair.pointwise.weights;
  const std::size_t r = pair.depthwise.multiplier, c = pair.depthwise.channels;
  if (pair.rank != r || td.n() != r * c || td.c() != 1 || ts.c() != r * c ||
      ts.kw() != 1 || ts.kh() != 1) {
    fail_validation("reconstruct: inconsistent depthwise/pointwise extents");
  }
  const std::size_t n = ts.n(), kw = td.kw(), kh = td.kh();
  Tensor4 out({n, kw, kh, c});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t x = 0; x < kw; ++x) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t i = 0; i < c; ++i) {
          double acc = 0.0;
          for (std::size_t t = 0; t < r; ++t) {
            acc += static_cast<double>(ts(j, 0, 0, i * r + t)) * td(i * r + t, x, y, 0);
          }
          out(j, x, y, i) = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

ChannelPair channel_decompose(const ConvWeights& layer, std::size_t filters) {
  check_layer(layer, "channel");
  const Tensor4& t = layer.weights;
  check_rank(filters, channel_max_rank(t.dims()), "channel");

  const std::size_t n = t.n(), kw = t.kw(), kh = t.kh(), c = t.c();
  const Matrix b = channel_matrix(t);
  const TruncatedSvd f = svd_truncate(svd(b), filters);
  const Matrix second = scale_rows(f.sigma, f.vt);  // c' x n

  ChannelPair pair;
  // Filter f of the thin layer is column f of U, laid out in (x, y, i) order.
  pair.first.weights = reshape(transpose(f.u), {filters, kw, kh, c});
  pair.first.stride = layer.stride;
  pair.first.padding = layer.padding;
  pair.second.weights = reshape(transpose(second), {n, 1, 1, filters});
  pair.second.bias = layer.bias;
  pair.reconstruction_error = std::sqrt(factor_error_sq(b, f.u, second));
  return pair;
}

Tensor4 reconstruct(const ChannelPair& pair) {
  const Tensor4& first = pair.first.weights;
  const Tensor4& second = pair.second.weights;
  if (second.c() != first.n() || second.kw() != 1 || second.kh() != 1) {
    fail_validation("reconstruct: inconsistent channel-pair extents");
  }
  const std::size_t n = second.n(), kw = first.kw(), kh = first.kh(), c = first.c();
  Tensor4 out({n, kw, kh, c});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t x = 0; x < kw; ++x) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t i = 0; i < c; ++i) {
          double acc = 0.0;
          for (std::size_t f = 0; f < first.n(); ++f) {
            acc += static_cast<double>(second(j, 0, 0, f)) * first(f, x, y, i);
          }
          out(j, x, y, i) = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

SpatialPair spatial_decompose(const ConvWeights& layer, std::size_t filters) {
  check_layer(layer, "spatial");
  const Tensor4& t = layer.weights;
  check_rank(filters, spatial_max_rank(t.dims()), "spatial");

  const std::size_t n = t.n(), kw = t.kw(), kh = t.kh(), c = t.c();
  const Matrix a = spatial_matrix(t);
  const TruncatedSvd f = svd_truncate(svd(a), filters);
  const Matrix second = scale_rows(f.sigma, f.vt);  // c' x (kh*n)

  SpatialPair pair;
  pair.horizontal.weights = Tensor4({filters, kw, 1, c});
  pair.horizontal.stride = {layer.stride.w, 1};
  pair.horizontal.padding = {layer.padding.w, 0};
  pair.vertical.weights = Tensor4({n, 1, kh, filters});
  pair.vertical.stride = {1, layer.stride.h};
  pair.vertical.padding = {0, layer.padding.h};
  pair.vertical.bias = layer.bias;
  for (std::size_t k = 0; k < filters; ++k) {
    for (std::size_t x = 0; x < kw; ++x) {
      for (std::size_t i = 0; i < c; ++i) {
        pair.horizontal.weights(k, x, 0, i) = f.u(x * c + i, k);
      }
    }
    for (std::size_t y = 0; y < kh; ++y) {
      for (std::size_t j = 0; j < n; ++j) {
        pair.vertical.weights(j, 0, y, k) = second(k, y * n + j);
      }
    }
  }
  pair.reconstruction_error = std::sqrt(factor_error_sq(a, f.u, second));
  return pair;
}

Tensor4 reconstruct(const SpatialPair& pair) {
  const Tensor4& h = pair.horizontal.weights;
  const Tensor4& v = pair.vertical.weights;
  if (h.kh() != 1 || v.kw() != 1 || v.c() != h.n()) {
    fail_validation("reconstruct: inconsistent spatial-pair extents");
  }
  const std::size_t n = v.n(), kw = h.kw(), kh = v.kh(), c = h.c();
  Tensor4 out({n, kw, kh, c});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t x = 0; x < kw; ++x) {
      for (std::size_t y = 0; y < kh; ++y) {
        for (std::size_t i = 0; i < c; ++i) {
          double acc = 0.0;
          for (std::size_t f = 0; f < h.n(); ++f) {
            acc += static_cast<double>(v(j, 0, y, f)) * h(f, x, 0, i);
          }
          out(j, x, y, i) = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

std::size_t match_rank(const Tensor4::Dims& d, std::size_t rank, Scheme target) {
  if (rank < 1) fail_validation("match_rank: rank must be at least 1");
  const std::uint64_t n = d[0], kw = d[1], kh = d[2], c = d[3];
  std::uint64_t num = 0, den = 0;
  switch (target) {
    case Scheme::dac:
      num = rank;
      den = 1;
      break;
    case Scheme::channel:
      num = rank * c * (n + kh * kw);
      den = c * kh * kw + n;
      break;
    case Scheme::spatial:
      num = rank * c * (n + kh * kw);
      den = c * kw + n * kh;
      break;
  }
  if (den == 0) fail_validation("match_rank: degenerate layer shape");
  // Half-up rounding of num / den, exact in integers.
  const std::uint64_t rounded = (2 * num + den) / (2 * den);
  const std::uint64_t hi = max_rank(target, d);
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(rounded, 1, std::max<std::uint64_t>(hi, 1)));
}

}  // namespace convkit
