#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "convkit/error.hpp"

namespace convkit {

/// Dense 4-D float tensor. Axis order is fixed to (n, k_w, k_h, c): output
/// filters, kernel width, kernel height, input channels. Row-major, so the
/// input-channel axis is contiguous.
class Tensor4 {
 public:
  using Dims = std::array<std::size_t, 4>;

  Tensor4() = default;
  explicit Tensor4(Dims dims);
  Tensor4(Dims dims, std::vector<float> data);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t n() const noexcept { return dims_[0]; }
  std::size_t kw() const noexcept { return dims_[1]; }
  std::size_t kh() const noexcept { return dims_[2]; }
  std::size_t c() const noexcept { return dims_[3]; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t j, std::size_t x, std::size_t y,
                     std::size_t i) const noexcept {
    return ((j * dims_[1] + x) * dims_[2] + y) * dims_[3] + i;
  }
  float& operator()(std::size_t j, std::size_t x, std::size_t y, std::size_t i) {
    return data_[offset(j, x, y, i)];
  }
  float operator()(std::size_t j, std::size_t x, std::size_t y,
                   std::size_t i) const {
    return data_[offset(j, x, y, i)];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  Dims dims_{0, 0, 0, 0};
  std::vector<float> data_;
};

/// Row-major float matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Activation map, row-major over (width, height, channels).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t width, std::size_t height, std::size_t channels);
  FeatureMap(std::size_t width, std::size_t height, std::size_t channels,
             std::vector<float> data);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t x, std::size_t y, std::size_t ch) const noexcept {
    return (x * height_ + y) * channels_ + ch;
  }
  float& operator()(std::size_t x, std::size_t y, std::size_t ch) {
    return data_[offset(x, y, ch)];
  }
  float operator()(std::size_t x, std::size_t y, std::size_t ch) const {
    return data_[offset(x, y, ch)];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

/// M_i for input channel i: an (n, k_w*k_h) matrix with
/// M_i[j, x*k_h + y] = T[j, x, y, i].
Matrix channel_slice(const Tensor4& t, std::size_t i);

/// Inverse of channel_slice over all channels: rebuilds a (n, k_w, k_h, c)
/// tensor from c slices of shape (n, k_w*k_h).
Tensor4 assemble_channels(std::span<const Matrix> slices, std::size_t kw,
                          std::size_t kh);

/// sqrt of the sum of squares, accumulated in double.
double frobenius_norm(std::span<const float> values);
inline double frobenius_norm(const Tensor4& t) { return frobenius_norm(t.data()); }
inline double frobenius_norm(const Matrix& m) { return frobenius_norm(m.data()); }

/// Frobenius norm of a - b. Extents must match.
double frobenius_distance(const Tensor4& a, const Tensor4& b);

// Reshape family. Row-major-compatible reshapes keep the flat data; the
// permuting forms make an explicit copy.

/// Relabels a matrix as a tensor with the given extents.
Tensor4 reshape(const Matrix& m, Tensor4::Dims dims);
/// Relabels a tensor as a rows x cols matrix.
Matrix reshape(const Tensor4& t, std::size_t rows, std::size_t cols);
/// Relabels a tensor with new extents.
Tensor4 reshape(const Tensor4& t, Tensor4::Dims dims);

/// Copy with axes permuted: result axis k is source axis perm[k].
Tensor4 permute(const Tensor4& t, std::array<std::size_t, 4> perm);

Matrix transpose(const Matrix& m);

bool all_finite(std::span<const float> values);

}  // namespace convkit
