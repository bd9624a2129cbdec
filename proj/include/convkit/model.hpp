#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convkit/conv.hpp"
#include "convkit/tensor.hpp"

namespace convkit {

enum class LayerKind { conv2d, depthwise, pointwise, relu, maxpool2, flatten, dense };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view s);

/// (width, height, channels) of an activation.
struct Shape3 {
  std::size_t w = 0;
  std::size_t h = 0;
  std::size_t c = 0;
  bool operator==(const Shape3&) const = default;
};

/// One layer of a sequential model. Which attributes are meaningful depends on
/// `kind`:
///   conv2d    filters, kernel, stride, padding, weight, bias?
///   depthwise multiplier, kernel, stride, padding, weight
///   pointwise filters, weight, bias?
///   dense     filters (output units), weight, bias?
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t filters = 0;
  std::size_t multiplier = 1;
  Extent2 kernel{1, 1};
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  std::string weight;  // tensor name, empty if the kind has none
  std::string bias;    // tensor name, empty if absent

  bool operator==(const LayerSpec&) const = default;
};

struct StoredTensor {
  std::vector<std::size_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  bool operator==(const StoredTensor&) const = default;
};

/// Per-layer result of shape inference.
struct LayerTrace {
  std::string name;
  LayerKind kind;
  Shape3 input;
  Shape3 output;
  std::uint64_t macs = 0;
};

/// Sequential model: ordered layers plus a name -> tensor store.
struct ModelGraph {
  Shape3 input;
  std::vector<LayerSpec> layers;
  std::map<std::string, StoredTensor> tensors;

  bool operator==(const ModelGraph&) const = default;

  const LayerSpec* find_layer(std::string_view name) const;

  /// Shape-only pass: checks layer attributes and extents and returns output
  /// shapes and MACs. Does not look at tensor data.
  std::vector<LayerTrace> trace() const;

  /// Full validation: trace() plus every referenced tensor present, with the
  /// declared extents and finite values. Throws validation errors naming the
  /// offending layer or tensor.
  void validate() const;
  /// validate() without reading tensor values: checks references and
  /// declared extents only.
  void validate_structure() const;

  std::uint64_t total_macs() const;

  ConvWeights conv_weights(const LayerSpec& layer) const;
  DepthwiseWeights depthwise_weights(const LayerSpec& layer) const;
  PointwiseWeights pointwise_weights(const LayerSpec& layer) const;
  DenseWeights dense_weights(const LayerSpec& layer) const;
};

/// Executable form of a validated model with typed weights.
class Network {
 public:
  explicit Network(const ModelGraph& model);

  FeatureMap forward(const FeatureMap& input, MacCounter& counter) const;
  FeatureMap forward(const FeatureMap& input) const;

  const Shape3& input_shape() const noexcept { return input_; }

 private:
  struct Relu {};
  struct MaxPool {};
  struct Flatten {};
  using Op = std::variant<ConvWeights, DepthwiseWeights, PointwiseWeights,
                          DenseWeights, Relu, MaxPool, Flatten>;

  Shape3 input_;
  std::vector<std::pair<std::string, Op>> ops_;
};

// Container format: a JSON manifest plus one blob of little-endian f32 values.
// Tensors are laid out back to back in the blob in manifest key order;
// "offset" and "len" are in bytes.

ModelGraph load_model(const std::filesystem::path& manifest,
                      const std::filesystem::path& blob);
void save_model(const ModelGraph& model, const std::filesystem::path& manifest,
                const std::filesystem::path& blob);

/// Serialized forms, for byte-exact comparisons without touching disk.
std::string manifest_text(const ModelGraph& model);
std::vector<std::uint8_t> blob_bytes(const ModelGraph& model);
ModelGraph parse_model(std::string_view manifest, std::span<const std::uint8_t> blob);

/// Manifest only: tensors carry their dims but no values. Enough for trace()
/// and validate_structure().
ModelGraph load_manifest(const std::filesystem::path& manifest);

/// model.json -> model.bin
std::filesystem::path default_blob_path(const std::filesystem::path& manifest);

}  // namespace convkit
