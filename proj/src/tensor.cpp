#include "convkit/tensor.hpp"

#include <cmath>
#include <algorithm>
#include <string>

namespace convkit {
namespace {

std::size_t product(const Tensor4::Dims& d) {
  return d[0] * d[1] * d[2] * d[3];
}

std::string dims_string(const Tensor4::Dims& d) {
  return "(" + std::to_string(d[0]) + ", " + std::to_string(d[1]) + ", " +
         std::to_string(d[2]) + ", " + std::to_string(d[3]) + ")";
}

}  // namespace

Tensor4::Tensor4(Dims dims) : dims_(dims), data_(product(dims), 0.0f) {}

Tensor4::Tensor4(Dims dims, std::vector<float> data)
    : dims_(dims), data_(std::move(data)) {
  if (data_.size() != product(dims_)) {
    fail_validation("tensor " + dims_string(dims_) + " needs " +
                    std::to_string(product(dims_)) + " values, got " +
                    std::to_string(data_.size()));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail_validation("matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " needs " + std::to_string(rows * cols) + " values, got " +
                    std::to_string(data_.size()));
  }
}

FeatureMap::FeatureMap(std::size_t width, std::size_t height, std::size_t channels)
    : width_(width), height_(height), channels_(channels),
      data_(width * height * channels, 0.0f) {}

FeatureMap::FeatureMap(std::size_t width, std::size_t height, std::size_t channels,
                       std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (data_.size() != width_ * height_ * channels_) {
    fail_validation("feature map " + std::to_string(width) + "x" +
                    std::to_string(height) + "x" + std::to_string(channels) +
                    " needs " + std::to_string(width * height * channels) +
                    " values, got " + std::to_string(data_.size()));
  }
}

Matrix channel_slice(const Tensor4& t, std::size_t i) {
  if (i >= t.c()) {
    fail_validation("channel index " + std::to_string(i) +
                    " out of range for input-channel axis c of extent " +
                    std::to_string(t.c()));
  }
  const std::size_t taps = t.kw() * t.kh();
  Matrix m(t.n(), taps);
  for (std::size_t j = 0; j < t.n(); ++j) {
    for (std::size_t x = 0; x < t.kw(); ++x) {
      for (std::size_t y = 0; y < t.kh(); ++y) {
        m(j, x * t.kh() + y) = t(j, x, y, i);
      }
    }
  }
  return m;
}

Tensor4 assemble_channels(std::span<const Matrix> slices, std::size_t kw,
                          std::size_t kh) {
  if (slices.empty()) fail_validation("assemble_channels: no slices");
  const std::size_t n = slices.front().rows();
  Tensor4 t({n, kw, kh, slices.size()});
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const Matrix& m = slices[i];
    if (m.rows() != n || m.cols() != kw * kh) {
      fail_validation("assemble_channels: slice " + std::to_string(i) +
                      " has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(n) +
                      "x" + std::to_string(kw * kh));
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t x = 0; x < kw; ++x) {
        for (std::size_t y = 0; y < kh; ++y) t(j, x, y, i) = m(j, x * kh + y);
      }
    }
  }
  return t;
}

double frobenius_norm(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

double frobenius_distance(const Tensor4& a, const Tensor4& b) {
  if (a.dims() != b.dims()) {
    fail_validation("frobenius_distance: extents " + dims_string(a.dims()) +
                    " vs " + dims_string(b.dims()));
  }
  double sum = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) {
    const double d = static_cast<double>(da[k]) - db[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Tensor4 reshape(const Matrix& m, Tensor4::Dims dims) {
  if (product(dims) != m.size()) {
    fail_validation("reshape: " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + " matrix cannot become " +
                    dims_string(dims));
  }
  return Tensor4(dims, std::vector<float>(m.data().begin(), m.data().end()));
}

Matrix reshape(const Tensor4& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size()) {
    fail_validation("reshape: tensor " + dims_string(t.dims()) + " cannot become " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  return Matrix(rows, cols, t.values());
}

Tensor4 reshape(const Tensor4& t, Tensor4::Dims dims) {
  if (product(dims) != t.size()) {
    fail_validation("reshape: tensor " + dims_string(t.dims()) + " cannot become " +
                    dims_string(dims));
  }
  return Tensor4(dims, t.values());
}

Tensor4 permute(const Tensor4& t, std::array<std::size_t, 4> perm) {
  std::array<bool, 4> seen{};
  for (std::size_t p : perm) {
    if (p > 3 || seen[p]) fail_validation("permute: not a permutation of 0..3");
    seen[p] = true;
  }
  const auto& src = t.dims();
  Tensor4 out({src[perm[0]], src[perm[1]], src[perm[2]], src[perm[3]]});
  std::array<std::size_t, 4> idx{};
  for (idx[0] = 0; idx[0] < src[0]; ++idx[0]) {
    for (idx[1] = 0; idx[1] < src[1]; ++idx[1]) {
      for (idx[2] = 0; idx[2] < src[2]; ++idx[2]) {
        for (idx[3] = 0; idx[3] < src[3]; ++idx[3]) {
          out(idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]]) =
              t(idx[0], idx[1], idx[2], idx[3]);
        }
      }
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

}  // namespace convkit
