#include "convkit/conv.hpp"

#include <algorithm>
#include <string>

namespace convkit {
namespace {

// Float products summed in double with four independent accumulators.
double dot(const float* a, const float* b, std::size_t len) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= len; k += 4) {
    s0 += static_cast<double>(a[k]) * b[k];
    s1 += static_cast<double>(a[k + 1]) * b[k + 1];
    s2 += static_cast<double>(a[k + 2]) * b[k + 2];
    s3 += static_cast<double>(a[k + 3]) * b[k + 3];
  }
  for (; k < len; ++k) s0 += static_cast<double>(a[k]) * b[k];
  return (s0 + s1) + (s2 + s3);
}

void check_bias(const std::optional<std::vector<float>>& bias, std::size_t n,
                const char* what) {
  if (bias && bias->size() != n) {
    fail_validation(std::string(what) + ": bias has " + std::to_string(bias->size()) +
                    " entries, expected " + std::to_string(n));
  }
}

void check_positive(Extent2 e, const char* what, const char* field) {
  if (e.w == 0 || e.h == 0) {
    fail_validation(std::string(what) + ": " + field + " must be positive");
  }
}

std::string channel_mismatch(const std::string& name, std::size_t got,
                             std::size_t want) {
  return name + ": input has " + std::to_string(got) + " channels, layer expects " +
         std::to_string(want);
}

}  // namespace

void ConvWeights::validate() const {
  if (weights.size() == 0) fail_validation("conv2d: empty weight tensor");
  check_bias(bias, weights.n(), "conv2d");
  check_positive(stride, "conv2d", "stride");
}

void DepthwiseWeights::validate() const {
  if (multiplier == 0 || channels == 0) {
    fail_validation("depthwise: multiplier and channels must be positive");
  }
  if (weights.n() != multiplier * channels || weights.c() != 1) {
    fail_validation("depthwise: weights must be (" +
                    std::to_string(multiplier * channels) + ", k_w, k_h, 1)");
  }
  if (weights.kw() == 0 || weights.kh() == 0) {
    fail_validation("depthwise: empty kernel");
  }
  check_positive(stride, "depthwise", "stride");
}

void PointwiseWeights::validate() const {
  if (weights.kw() != 1 || weights.kh() != 1) {
    fail_validation("pointwise: spatial extents must be 1x1");
  }
  if (weights.size() == 0) fail_validation("pointwise: empty weight tensor");
  check_bias(bias, weights.n(), "pointwise");
}

void DenseWeights::validate() const {
  if (weights.kw() != 1 || weights.kh() != 1 || weights.size() == 0) {
    fail_validation("dense: weights must be (out, 1, 1, in)");
  }
  check_bias(bias, weights.n(), "dense");
}

void MacCounter::add(std::string layer, std::uint64_t macs) {
  total_ += macs;
  breakdown_.emplace_back(std::move(layer), macs);
}

void MacCounter::merge(const MacCounter& other) {
  for (const auto& [name, macs] : other.breakdown_) add(name, macs);
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) fail_validation("stride must be positive");
  if (kernel == 0 || kernel > in + 2 * pad) {
    fail_validation("kernel extent " + std::to_string(kernel) +
                    " does not fit padded input extent " +
                    std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

std::uint64_t conv2d_macs(std::size_t out_w, std::size_t out_h, std::size_t c,
                          std::size_t kw, std::size_t kh, std::size_t n) {
  return std::uint64_t{out_w} * out_h * c * kw * kh * n;
}

std::uint64_t depthwise_macs(std::size_t out_w, std::size_t out_h, std::size_t kw,
                             std::size_t kh, std::size_t rc) {
  return std::uint64_t{out_w} * out_h * kw * kh * rc;
}

std::uint64_t pointwise_macs(std::size_t w, std::size_t h, std::size_t rc,
                             std::size_t n) {
  return std::uint64_t{w} * h * rc * n;
}

FeatureMap conv2d(const FeatureMap& input, const ConvWeights& layer,
                  MacCounter& counter, const std::string& name) {
  layer.validate();
  const Tensor4& t = layer.weights;
  const std::size_t n = t.n(), kw = t.kw(), kh = t.kh(), c = t.c();
  if (input.channels() != c) fail_validation(channel_mismatch(name, input.channels(), c));

  const std::size_t out_w =
      conv_output_extent(input.width(), kw, layer.stride.w, layer.padding.w);
  const std::size_t out_h =
      conv_output_extent(input.height(), kh, layer.stride.h, layer.padding.h);
  FeatureMap out(out_w, out_h, n);

  // The (x, y, i) order of a zero-padded input patch matches the layout of one
  // filter, so every output value is a single contiguous dot product.
  const std::size_t patch_len = kw * kh * c;
  std::vector<float> patch(patch_len);
  const float* in = input.data().data();
  const float* w = t.data().data();
  for (std::size_t ox = 0; ox < out_w; ++ox) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t x = 0; x < kw; ++x) {
        const long ix = static_cast<long>(ox * layer.stride.w + x) -
                        static_cast<long>(layer.padding.w);
        for (std::size_t y = 0; y < kh; ++y) {
          const long iy = static_cast<long>(oy * layer.stride.h + y) -
                          static_cast<long>(layer.padding.h);
          float* dst = patch.data() + (x * kh + y) * c;
          if (ix < 0 || iy < 0 || ix >= static_cast<long>(input.width()) ||
              iy >= static_cast<long>(input.height())) {
            std::fill(dst, dst + c, 0.0f);
          } else {
            const float* src = in + input.offset(ix, iy, 0);
            std::copy(src, src + c, dst);
          }
        }
      }
      float* o = out.data().data() + out.offset(ox, oy, 0);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = dot(patch.data(), w + j * patch_len, patch_len);
        if (layer.bias) acc += (*layer.bias)[j];
        o[j] = static_cast<float>(acc);
      }
    }
  }
  counter.add(name, conv2d_macs(out_w, out_h, c, kw, kh, n));
  return out;
}

FeatureMap depthwise_conv(const FeatureMap& input, const DepthwiseWeights& layer,
                          MacCounter& counter, const std::string& name) {
  layer.validate();
  const std::size_t c = layer.channels, r = layer.multiplier;
  const std::size_t kw = layer.weights.kw(), kh = layer.weights.kh();
  if (input.channels() != c) fail_validation(channel_mismatch(name, input.channels(), c));

  const std::size_t out_w =
      conv_output_extent(input.width(), kw, layer.stride.w, layer.padding.w);
  const std::size_t out_h =
      conv_output_extent(input.height(), kh, layer.stride.h, layer.padding.h);
  const std::size_t rc = r * c;
  FeatureMap out(out_w, out_h, rc);

  // Per pixel: gather the (x, y) taps for all channels, then apply kernels.
  const std::size_t taps = kw * kh;
  std::vector<float> patch(c * taps);  // patch[i * taps + x * kh + y]
  const float* w = layer.weights.data().data();  // w[(i*r + t) * taps + tap]
  for (std::size_t ox = 0; ox < out_w; ++ox) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t x = 0; x < kw; ++x) {
        const long ix = static_cast<long>(ox * layer.stride.w + x) -
                        static_cast<long>(layer.padding.w);
        for (std::size_t y = 0; y < kh; ++y) {
          const long iy = static_cast<long>(oy * layer.stride.h + y) -
                          static_cast<long>(layer.padding.h);
          const bool inside = ix >= 0 && iy >= 0 &&
                              ix < static_cast<long>(input.width()) &&
                              iy < static_cast<long>(input.height());
          for (std::size_t i = 0; i < c; ++i) {
            patch[i * taps + x * kh + y] = inside ? input(ix, iy, i) : 0.0f;
          }
        }
      }
      float* o = out.data().data() + out.offset(ox, oy, 0);
      for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t t = 0; t < r; ++t) {
          const std::size_t k = i * r + t;
          o[k] = static_cast<float>(dot(patch.data() + i * taps, w + k * taps, taps));
        }
      }
    }
  }
  counter.add(name, depthwise_macs(out_w, out_h, kw, kh, rc));
  return out;
}

FeatureMap pointwise_conv(const FeatureMap& input, const PointwiseWeights& layer,
                          MacCounter& counter, const std::string& name) {
  layer.validate();
  const std::size_t n = layer.weights.n(), rc = layer.weights.c();
  if (input.channels() != rc) {
    fail_validation(channel_mismatch(name, input.channels(), rc));
  }
  FeatureMap out(input.width(), input.height(), n);
  const float* w = layer.weights.data().data();
  for (std::size_t x = 0; x < input.width(); ++x) {
    for (std::size_t y = 0; y < input.height(); ++y) {
      const float* src = input.data().data() + input.offset(x, y, 0);
      float* o = out.data().data() + out.offset(x, y, 0);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = dot(src, w + j * rc, rc);
        if (layer.bias) acc += (*layer.bias)[j];
        o[j] = static_cast<float>(acc);
      }
    }
  }
  counter.add(name, pointwise_macs(input.width(), input.height(), rc, n));
  return out;
}

FeatureMap dense(const FeatureMap& input, const DenseWeights& layer,
                 MacCounter& counter, const std::string& name) {
  layer.validate();
  const std::size_t out_units = layer.weights.n(), in_units = layer.weights.c();
  if (input.size() != in_units) {
    fail_validation(name + ": input has " + std::to_string(input.size()) +
                    " values, layer expects " + std::to_string(in_units));
  }
  FeatureMap out(1, 1, out_units);
  const float* w = layer.weights.data().data();
  for (std::size_t j = 0; j < out_units; ++j) {
    double acc = dot(input.data().data(), w + j * in_units, in_units);
    if (layer.bias) acc += (*layer.bias)[j];
    out(0, 0, j) = static_cast<float>(acc);
  }
  counter.add(name, std::uint64_t{in_units} * out_units);
  return out;
}

FeatureMap relu(const FeatureMap& input) {
  FeatureMap out = input;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

FeatureMap maxpool2(const FeatureMap& input) {
  if (input.width() < 2 || input.height() < 2) {
    fail_validation("maxpool2: input " + std::to_string(input.width()) + "x" +
                    std::to_string(input.height()) + " is smaller than the 2x2 window");
  }
  FeatureMap out(input.width() / 2, input.height() / 2, input.channels());
  for (std::size_t x = 0; x < out.width(); ++x) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t ch = 0; ch < out.channels(); ++ch) {
        out(x, y, ch) = std::max(
            std::max(input(2 * x, 2 * y, ch), input(2 * x + 1, 2 * y, ch)),
            std::max(input(2 * x, 2 * y + 1, ch), input(2 * x + 1, 2 * y + 1, ch)));
      }
    }
  }
  return out;
}

FeatureMap flatten(const FeatureMap& input) {
  return FeatureMap(1, 1, input.size(),
                    std::vector<float>(input.data().begin(), input.data().end()));
}

}  // namespace convkit
