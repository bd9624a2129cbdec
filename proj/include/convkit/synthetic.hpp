#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "convkit/model.hpp"
#include "convkit/rng.hpp"

namespace convkit {

struct SyntheticOptions {
  std::uint64_t seed = 1;
  /// Per-frequency amplitude decay of generated conv kernels. Each k_w x k_h
  /// kernel is drawn in an orthonormal DCT basis with coefficient scale
  /// decay^(fx + fy). 1.0 gives i.i.d. Gaussian weights; smaller values give
  /// the spatially smooth kernels typical of trained networks.
  double spatial_decay = 1.0;
  bool bias = true;
};

/// Appends layers with He-scaled random weights to a model.
class ModelBuilder {
 public:
  ModelBuilder(Shape3 input, SyntheticOptions options);

  ModelBuilder& conv(const std::string& name, std::size_t filters, Extent2 kernel,
                     Extent2 stride = {1, 1}, Extent2 padding = {0, 0});
  /// 3x3, stride 1, padding 1.
  ModelBuilder& conv3x3(const std::string& name, std::size_t filters);
  ModelBuilder& relu(const std::string& name);
  ModelBuilder& maxpool2(const std::string& name);
  ModelBuilder& flatten(const std::string& name);
  ModelBuilder& dense(const std::string& name, std::size_t units);

  const Shape3& current_shape() const noexcept { return shape_; }
  ModelGraph build() const;

 private:
  ModelGraph model_;
  Shape3 shape_;
  SyntheticOptions options_;
  Rng rng_;
};

/// Kernel tensor (n, k_w, k_h, c) with the spatial spectrum described in
/// SyntheticOptions, scaled so the expected per-entry variance is `variance`.
Tensor4 random_kernel(Tensor4::Dims dims, double variance, double spatial_decay,
                      Rng& rng);

/// The 13-conv CIFAR VGG layout on a 32x32x3 input: five stages of 3x3 same
/// convs (64x2, 128x2, 256x3, 512x3, 512x3) each followed by 2x2 max pooling,
/// then flatten, dense 512, relu, dense 10. Conv layers are named
/// conv2d_1 .. conv2d_13. `width_divisor` shrinks every conv and hidden
/// dense width for quick runs.
ModelGraph make_cifar_vgg(const SyntheticOptions& options,
                          std::size_t width_divisor = 1);

}  // namespace convkit
