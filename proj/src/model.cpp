#include "convkit/model.hpp"

#include <numeric>
#include <set>
#include <string>

namespace convkit {
namespace {

std::string dims_string(const std::vector<std::size_t>& dims) {
  std::string s = "[";
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) s += ", ";
    s += std::to_string(dims[k]);
  }
  return s + "]";
}

std::string shape_string(const Shape3& s) {
  return std::to_string(s.w) + "x" + std::to_string(s.h) + "x" + std::to_string(s.c);
}

Shape3 trace_layer(const LayerSpec& layer, const Shape3& in, std::uint64_t& macs) {
  macs = 0;
  switch (layer.kind) {
    case LayerKind::conv2d: {
      if (layer.filters == 0) fail_validation("filters must be positive");
      const std::size_t w =
          conv_output_extent(in.w, layer.kernel.w, layer.stride.w, layer.padding.w);
      const std::size_t h =
          conv_output_extent(in.h, layer.kernel.h, layer.stride.h, layer.padding.h);
      macs = conv2d_macs(w, h, in.c, layer.kernel.w, layer.kernel.h, layer.filters);
      return {w, h, layer.filters};
    }
    case LayerKind::depthwise: {
      if (layer.multiplier == 0) fail_validation("multiplier must be positive");
      const std::size_t w =
          conv_output_extent(in.w, layer.kernel.w, layer.stride.w, layer.padding.w);
      const std::size_t h =
          conv_output_extent(in.h, layer.kernel.h, layer.stride.h, layer.padding.h);
      const std::size_t rc = layer.multiplier * in.c;
      macs = depthwise_macs(w, h, layer.kernel.w, layer.kernel.h, rc);
      return {w, h, rc};
    }
    case LayerKind::pointwise:
      if (layer.filters == 0) fail_validation("filters must be positive");
      macs = pointwise_macs(in.w, in.h, in.c, layer.filters);
      return {in.w, in.h, layer.filters};
    case LayerKind::relu:
      return in;
    case LayerKind::maxpool2:
      if (in.w < 2 || in.h < 2) {
        fail_validation("input " + shape_string(in) + " is smaller than the 2x2 window");
      }
      return {in.w / 2, in.h / 2, in.c};
    case LayerKind::flatten:
      return {1, 1, in.w * in.h * in.c};
    case LayerKind::dense:
      if (layer.filters == 0) fail_validation("filters must be positive");
      if (in.w != 1 || in.h != 1) {
        fail_validation("dense needs a flattened 1x1xN input, got " + shape_string(in));
      }
      macs = std::uint64_t{in.c} * layer.filters;
      return {1, 1, layer.filters};
  }
  return in;
}

const StoredTensor& require_tensor(const ModelGraph& model, const LayerSpec& layer,
                                   const std::string& name, const char* role) {
  if (name.empty()) {
    fail_validation("layer '" + layer.name + "' has no " + role + " tensor");
  }
  auto it = model.tensors.find(name);
  if (it == model.tensors.end()) {
    fail_validation("layer '" + layer.name + "' references missing tensor '" + name +
                    "'");
  }
  return it->second;
}

Tensor4 as_tensor4(const StoredTensor& t) {
  if (t.dims.size() == 4) {
    return Tensor4({t.dims[0], t.dims[1], t.dims[2], t.dims[3]}, t.data);
  }
  if (t.dims.size() == 2) return Tensor4({t.dims[0], 1, 1, t.dims[1]}, t.data);
  fail_validation("expected a 2-D or 4-D tensor, got " + dims_string(t.dims));
}

std::optional<std::vector<float>> bias_of(const ModelGraph& model,
                                          const LayerSpec& layer) {
  if (layer.bias.empty()) return std::nullopt;
  return require_tensor(model, layer, layer.bias, "bias").data;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::pointwise: return "pointwise";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view s) {
  for (LayerKind k : {LayerKind::conv2d, LayerKind::depthwise, LayerKind::pointwise,
                      LayerKind::relu, LayerKind::maxpool2, LayerKind::flatten,
                      LayerKind::dense}) {
    if (to_string(k) == s) return k;
  }
  fail_validation("unknown layer kind '" + std::string(s) + "'");
}

std::size_t StoredTensor::element_count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

const LayerSpec* ModelGraph::find_layer(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

std::vector<LayerTrace> ModelGraph::trace() const {
  if (input.w == 0 || input.h == 0 || input.c == 0) {
    fail_validation("model input shape " + shape_string(input) + " has a zero extent");
  }
  std::vector<LayerTrace> out;
  out.reserve(layers.size());
  std::set<std::string_view> names;
  Shape3 shape = input;
  for (const auto& layer : layers) {
    if (layer.name.empty()) fail_validation("layer with empty name");
    if (!names.insert(layer.name).second) {
      fail_validation("duplicate layer name '" + layer.name + "'");
    }
    LayerTrace t{layer.name, layer.kind, shape, {}, 0};
    try {
      t.output = trace_layer(layer, shape, t.macs);
    } catch (const Error& e) {
      throw Error(e.kind(), "layer '" + layer.name + "' (" +
                                std::string(to_string(layer.kind)) + "): " + e.what());
    }
    shape = t.output;
    out.push_back(std::move(t));
  }
  return out;
}

void ModelGraph::validate() const {
  validate_structure();
  for (const auto& [name, t] : tensors) {
    if (t.data.size() != t.element_count()) {
      fail_validation("tensor '" + name + "' declares " + dims_string(t.dims) +
                      " but holds " + std::to_string(t.data.size()) + " values");
    }
    if (!all_finite(t.data)) {
      fail_numeric("tensor '" + name + "' contains NaN or Inf");
    }
  }
}

void ModelGraph::validate_structure() const {
  const auto traces = trace();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& layer = layers[k];
    const std::size_t cin = traces[k].input.c;
    std::vector<std::size_t> want;
    bool has_bias = false;
    switch (layer.kind) {
      case LayerKind::conv2d:
        want = {layer.filters, layer.kernel.w, layer.kernel.h, cin};
        has_bias = true;
        break;
      case LayerKind::depthwise:
        want = {layer.multiplier * cin, layer.kernel.w, layer.kernel.h, 1};
        break;
      case LayerKind::pointwise:
        want = {layer.filters, 1, 1, cin};
        has_bias = true;
        break;
      case LayerKind::dense:
        want = {layer.filters, cin};
        has_bias = true;
        break;
      default:
        continue;
    }
    const StoredTensor& w = require_tensor(*this, layer, layer.weight, "weight");
    if (w.dims != want) {
      fail_validation("layer '" + layer.name + "': tensor '" + layer.weight +
                      "' has extents " + dims_string(w.dims) + ", expected " +
                      dims_string(want));
    }
    if (!layer.bias.empty()) {
      if (!has_bias) {
        fail_validation("layer '" + layer.name + "': " +
                        std::string(to_string(layer.kind)) + " layers take no bias");
      }
      const StoredTensor& b = require_tensor(*this, layer, layer.bias, "bias");
      if (b.dims != std::vector<std::size_t>{layer.filters}) {
        fail_validation("layer '" + layer.name + "': bias tensor '" + layer.bias +
                        "' has extents " + dims_string(b.dims) + ", expected [" +
                        std::to_string(layer.filters) + "]");
      }
    }
  }
}

std::uint64_t ModelGraph::total_macs() const {
  std::uint64_t total = 0;
  for (const auto& t : trace()) total += t.macs;
  return total;
}

ConvWeights ModelGraph::conv_weights(const LayerSpec& layer) const {
  ConvWeights w;
  w.weights = as_tensor4(require_tensor(*this, layer, layer.weight, "weight"));
  w.bias = bias_of(*this, layer);
  w.stride = layer.stride;
  w.padding = layer.padding;
  return w;
}

DepthwiseWeights ModelGraph::depthwise_weights(const LayerSpec& layer) const {
  DepthwiseWeights w;
  w.weights = as_tensor4(require_tensor(*this, layer, layer.weight, "weight"));
  w.multiplier = layer.multiplier;
  w.channels = layer.multiplier ? w.weights.n() / layer.multiplier : 0;
  w.stride = layer.stride;
  w.padding = layer.padding;
  return w;
}

PointwiseWeights ModelGraph::pointwise_weights(const LayerSpec& layer) const {
  PointwiseWeights w;
  w.weights = as_tensor4(require_tensor(*this, layer, layer.weight, "weight"));
  w.bias = bias_of(*this, layer);
  return w;
}

DenseWeights ModelGraph::dense_weights(const LayerSpec& layer) const {
  DenseWeights w;
  w.weights = as_tensor4(require_tensor(*this, layer, layer.weight, "weight"));
  w.bias = bias_of(*this, layer);
  return w;
}

Network::Network(const ModelGraph& model) : input_(model.input) {
  model.validate();
  ops_.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    switch (layer.kind) {
      case LayerKind::conv2d: ops_.emplace_back(layer.name, model.conv_weights(layer)); break;
      case LayerKind::depthwise:
        ops_.emplace_back(layer.name, model.depthwise_weights(layer));
        break;
      case LayerKind::pointwise:
        ops_.emplace_back(layer.name, model.pointwise_weights(layer));
        break;
      case LayerKind::dense: ops_.emplace_back(layer.name, model.dense_weights(layer)); break;
      case LayerKind::relu: ops_.emplace_back(layer.name, Relu{}); break;
      case LayerKind::maxpool2: ops_.emplace_back(layer.name, MaxPool{}); break;
      case LayerKind::flatten: ops_.emplace_back(layer.name, Flatten{}); break;
    }
  }
}

FeatureMap Network::forward(const FeatureMap& input, MacCounter& counter) const {
  if (input.width() != input_.w || input.height() != input_.h ||
      input.channels() != input_.c) {
    fail_validation("input map " + std::to_string(input.width()) + "x" +
                    std::to_string(input.height()) + "x" +
                    std::to_string(input.channels()) + " does not match model input " +
                    shape_string(input_));
  }
  FeatureMap x = input;
  for (const auto& [name, op] : ops_) {
    x = std::visit(
        [&](const auto& w) -> FeatureMap {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, ConvWeights>) {
            return conv2d(x, w, counter, name);
          } else if constexpr (std::is_same_v<T, DepthwiseWeights>) {
            return depthwise_conv(x, w, counter, name);
          } else if constexpr (std::is_same_v<T, PointwiseWeights>) {
            return pointwise_conv(x, w, counter, name);
          } else if constexpr (std::is_same_v<T, DenseWeights>) {
            return dense(x, w, counter, name);
          } else if constexpr (std::is_same_v<T, Relu>) {
            counter.add(name, 0);
            return relu(x);
          } else if constexpr (std::is_same_v<T, MaxPool>) {
            counter.add(name, 0);
            return maxpool2(x);
          } else {
            counter.add(name, 0);
            return flatten(x);
          }
        },
        op);
  }
  return x;
}

FeatureMap Network::forward(const FeatureMap& input) const {
  MacCounter counter;
  return forward(input, counter);
}

}  // namespace convkit
