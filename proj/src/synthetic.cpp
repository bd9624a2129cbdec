#include "convkit/synthetic.hpp"

#include <cmath>
#include <numbers>

namespace convkit {
namespace {

// Orthonormal DCT-II basis: basis[f][x].
std::vector<std::vector<double>> dct_basis(std::size_t len) {
  std::vector<std::vector<double>> b(len, std::vector<double>(len));
  for (std::size_t f = 0; f < len; ++f) {
    const double scale = std::sqrt((f == 0 ? 1.0 : 2.0) / static_cast<double>(len));
    for (std::size_t x = 0; x < len; ++x) {
      b[f][x] = scale * std::cos(std::numbers::pi * (static_cast<double>(x) + 0.5) *
                                 static_cast<double>(f) / static_cast<double>(len));
    }
  }
  return b;
}

}  // namespace

Tensor4 random_kernel(Tensor4::Dims dims, double variance, double spatial_decay,
                      Rng& rng) {
  Tensor4 t(dims);
  const std::size_t n = dims[0], kw = dims[1], kh = dims[2], c = dims[3];
  const auto bw = dct_basis(kw);
  const auto bh = dct_basis(kh);

  // Mean coefficient energy over the kw*kh frequencies; dividing it out keeps
  // the expected per-entry variance at `variance` for any decay.
  std::vector<double> amp(kw * kh);
  double energy = 0.0;
  for (std::size_t fx = 0; fx < kw; ++fx) {
    for (std::size_t fy = 0; fy < kh; ++fy) {
      amp[fx * kh + fy] = std::pow(spatial_decay, static_cast<double>(fx + fy));
      energy += amp[fx * kh + fy] * amp[fx * kh + fy];
    }
  }
  const double scale = std::sqrt(variance * static_cast<double>(kw * kh) / energy);

  std::vector<double> coeff(kw * kh);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t f = 0; f < kw * kh; ++f) coeff[f] = rng.normal() * amp[f] * scale;
      for (std::size_t x = 0; x < kw; ++x) {
        for (std::size_t y = 0; y < kh; ++y) {
          double v = 0.0;
          for (std::size_t fx = 0; fx < kw; ++fx) {
            for (std::size_t fy = 0; fy < kh; ++fy) {
              v += coeff[fx * kh + fy] * bw[fx][x] * bh[fy][y];
            }
          }
          t(j, x, y, i) = static_cast<float>(v);
        }
      }
    }
  }
  return t;
}

ModelBuilder::ModelBuilder(Shape3 input, SyntheticOptions options)
    : shape_(input), options_(options), rng_(options.seed) {
  model_.input = input;
}

ModelBuilder& ModelBuilder::conv(const std::string& name, std::size_t filters,
                                 Extent2 kernel, Extent2 stride, Extent2 padding) {
  LayerSpec l{.name = name, .kind = LayerKind::conv2d, .filters = filters,
              .kernel = kernel, .stride = stride, .padding = padding};
  l.weight = name + "/weight";
  const std::size_t fan_in = kernel.w * kernel.h * shape_.c;
  const Tensor4 w = random_kernel({filters, kernel.w, kernel.h, shape_.c},
                                  2.0 / static_cast<double>(fan_in),
                                  options_.spatial_decay, rng_);
  model_.tensors[l.weight] = {{filters, kernel.w, kernel.h, shape_.c}, w.values()};
  if (options_.bias) {
    l.bias = name + "/bias";
    std::vector<float> b(filters);
    for (float& v : b) v = static_cast<float>(0.1 * rng_.normal());
    model_.tensors[l.bias] = {{filters}, std::move(b)};
  }
  shape_ = {conv_output_extent(shape_.w, kernel.w, stride.w, padding.w),
            conv_output_extent(shape_.h, kernel.h, stride.h, padding.h), filters};
  model_.layers.push_back(std::move(l));
  return *this;
}

ModelBuilder& ModelBuilder::conv3x3(const std::string& name, std::size_t filters) {
  return conv(name, filters, {3, 3}, {1, 1}, {1, 1});
}

ModelBuilder& ModelBuilder::relu(const std::string& name) {
  model_.layers.push_back({.name = name, .kind = LayerKind::relu});
  return *this;
}

ModelBuilder& ModelBuilder::maxpool2(const std::string& name) {
  model_.layers.push_back({.name = name, .kind = LayerKind::maxpool2});
  shape_ = {shape_.w / 2, shape_.h / 2, shape_.c};
  return *this;
}

ModelBuilder& ModelBuilder::flatten(const std::string& name) {
  model_.layers.push_back({.name = name, .kind = LayerKind::flatten});
  shape_ = {1, 1, shape_.w * shape_.h * shape_.c};
  return *this;
}

ModelBuilder& ModelBuilder::dense(const std::string& name, std::size_t units) {
  LayerSpec l{.name = name, .kind = LayerKind::dense, .filters = units};
  l.weight = name + "/weight";
  const double stddev = std::sqrt(2.0 / static_cast<double>(shape_.c));
  std::vector<float> w(units * shape_.c);
  for (float& v : w) v = static_cast<float>(stddev * rng_.normal());
  model_.tensors[l.weight] = {{units, shape_.c}, std::move(w)};
  if (options_.bias) {
    l.bias = name + "/bias";
    std::vector<float> b(units);
    for (float& v : b) v = static_cast<float>(0.1 * rng_.normal());
    model_.tensors[l.bias] = {{units}, std::move(b)};
  }
  shape_ = {1, 1, units};
  model_.layers.push_back(std::move(l));
  return *this;
}

ModelGraph ModelBuilder::build() const {
  model_.validate();
  return model_;
}

ModelGraph make_cifar_vgg(const SyntheticOptions& options, std::size_t width_divisor) {
  if (width_divisor == 0) fail_usage("width divisor must be positive");
  const auto width = [&](std::size_t w) { return std::max<std::size_t>(1, w / width_divisor); };

  ModelBuilder b({32, 32, 3}, options);
  const std::size_t stages[5][3] = {{64, 64, 0}, {128, 128, 0}, {256, 256, 256},
                                    {512, 512, 512}, {512, 512, 512}};
  std::size_t conv_index = 0;
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t filters : stages[s]) {
      if (filters == 0) continue;
      ++conv_index;
      const std::string name = "conv2d_" + std::to_string(conv_index);
      b.conv3x3(name, width(filters)).relu(name + "_relu");
    }
    b.maxpool2("pool_" + std::to_string(s + 1));
  }
  b.flatten("flatten").dense("dense_1", width(512)).relu("dense_1_relu").dense("dense_2", 10);
  return b.build();
}

}  // namespace convkit
