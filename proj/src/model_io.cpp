#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "convkit/model.hpp"
#include "json.hpp"

namespace convkit {
namespace {

using nlohmann::json;

json extent_json(Extent2 e) { return json::array({e.w, e.h}); }

Extent2 parse_extent(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() ||
      !j[1].is_number_unsigned()) {
    fail_validation(std::string("'") + key + "' must be a [w, h] pair of unsigned integers");
  }
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

std::size_t parse_count(const json& j, const char* key) {
  if (!j.is_number_unsigned()) {
    fail_validation(std::string("'") + key + "' must be an unsigned integer");
  }
  return j.get<std::size_t>();
}

json layer_json(const LayerSpec& l) {
  json j;
  j["name"] = l.name;
  j["kind"] = std::string(to_string(l.kind));
  switch (l.kind) {
    case LayerKind::conv2d:
    case LayerKind::depthwise:
      if (l.kind == LayerKind::conv2d) {
        j["filters"] = l.filters;
      } else {
        j["multiplier"] = l.multiplier;
      }
      j["kernel"] = extent_json(l.kernel);
      j["stride"] = extent_json(l.stride);
      j["padding"] = extent_json(l.padding);
      j["weight"] = l.weight;
      break;
    case LayerKind::pointwise:
      j["filters"] = l.filters;
      j["weight"] = l.weight;
      break;
    case LayerKind::dense:
      j["units"] = l.filters;
      j["weight"] = l.weight;
      break;
    default:
      break;
  }
  if (!l.bias.empty()) j["bias"] = l.bias;
  return j;
}

LayerSpec parse_layer(const json& j, std::size_t index) {
  if (!j.is_object()) {
    fail_validation("layers[" + std::to_string(index) + "] is not an object");
  }
  LayerSpec l;
  if (!j.contains("name") || !j["name"].is_string()) {
    fail_validation("layers[" + std::to_string(index) + "] needs a string 'name'");
  }
  l.name = j["name"].get<std::string>();
  try {
    if (!j.contains("kind") || !j["kind"].is_string()) {
      fail_validation("missing string 'kind'");
    }
    l.kind = parse_layer_kind(j["kind"].get<std::string>());
    for (const auto& [key, value] : j.items()) {
      if (key == "name" || key == "kind") continue;
      if (key == "filters" || key == "units") {
        l.filters = parse_count(value, key.c_str());
      } else if (key == "multiplier") {
        l.multiplier = parse_count(value, "multiplier");
      } else if (key == "kernel") {
        l.kernel = parse_extent(value, "kernel");
      } else if (key == "stride") {
        l.stride = parse_extent(value, "stride");
      } else if (key == "padding") {
        l.padding = parse_extent(value, "padding");
      } else if (key == "weight" || key == "bias") {
        if (!value.is_string()) fail_validation("'" + key + "' must be a tensor name");
        (key == "weight" ? l.weight : l.bias) = value.get<std::string>();
      } else {
        fail_validation("unknown attribute '" + key + "'");
      }
    }
  } catch (const Error& e) {
    throw Error(e.kind(), "layer '" + l.name + "': " + e.what());
  }
  return l;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_usage("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_usage("cannot write '" + path.string() + "'");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) fail_usage("write to '" + path.string() + "' failed");
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

std::filesystem::path default_blob_path(const std::filesystem::path& manifest) {
  auto blob = manifest;
  blob.replace_extension(".bin");
  return blob;
}

std::string manifest_text(const ModelGraph& model) {
  json j;
  j["input"] = json::array({model.input.w, model.input.h, model.input.c});
  j["layers"] = json::array();
  for (const auto& l : model.layers) j["layers"].push_back(layer_json(l));
  j["tensors"] = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : model.tensors) {
    const std::uint64_t len = std::uint64_t{t.data.size()} * sizeof(float);
    j["tensors"][name] = {{"offset", offset}, {"len", len}, {"dims", t.dims}};
    offset += len;
  }
  return j.dump(2) + "\n";
}

std::vector<std::uint8_t> blob_bytes(const ModelGraph& model) {
  std::vector<std::uint8_t> out;
  for (const auto& [name, t] : model.tensors) {
    const std::size_t start = out.size();
    out.resize(start + t.data.size() * sizeof(float));
    for (std::size_t k = 0; k < t.data.size(); ++k) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(t.data[k]));
      std::memcpy(out.data() + start + k * sizeof(float), &bits, sizeof(bits));
    }
  }
  return out;
}

namespace {

// Parses the manifest. With a blob, tensor values are read from it; without
// one, tensors keep their dims and no values.
ModelGraph parse_manifest(std::string_view manifest,
                          const std::span<const std::uint8_t>* blob) {
  json j;
  try {
    j = json::parse(manifest);
  } catch (const json::exception& e) {
    fail_validation(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail_validation("manifest must be a JSON object");
  for (const char* key : {"input", "layers", "tensors"}) {
    if (!j.contains(key)) fail_validation(std::string("manifest lacks '") + key + "'");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "input" && key != "layers" && key != "tensors") {
      fail_validation("manifest has unknown key '" + key + "'");
    }
  }

  ModelGraph model;
  const json& input = j["input"];
  if (!input.is_array() || input.size() != 3) {
    fail_validation("'input' must be [W, H, C]");
  }
  model.input = {parse_count(input[0], "input"), parse_count(input[1], "input"),
                 parse_count(input[2], "input")};

  if (!j["layers"].is_array()) fail_validation("'layers' must be an array");
  for (std::size_t k = 0; k < j["layers"].size(); ++k) {
    model.layers.push_back(parse_layer(j["layers"][k], k));
  }

  if (!j["tensors"].is_object()) fail_validation("'tensors' must be an object");
  for (const auto& [name, entry] : j["tensors"].items()) {
    if (!entry.is_object() || !entry.contains("offset") || !entry.contains("len") ||
        !entry.contains("dims") || !entry["dims"].is_array()) {
      fail_validation("tensor '" + name + "' needs offset, len and dims");
    }
    StoredTensor t;
    for (const auto& d : entry["dims"]) t.dims.push_back(parse_count(d, "dims"));
    const std::uint64_t offset = parse_count(entry["offset"], "offset");
    const std::uint64_t len = parse_count(entry["len"], "len");
    const std::size_t count = t.element_count();
    if (len != std::uint64_t{count} * sizeof(float)) {
      fail_validation("tensor '" + name + "' has len " + std::to_string(len) +
                      " bytes but its dims need " + std::to_string(count * sizeof(float)));
    }
    if (blob) {
      if (offset > blob->size() || len > blob->size() - offset) {
        fail_validation("tensor '" + name + "' extends past the end of the blob (" +
                        std::to_string(blob->size()) + " bytes)");
      }
      t.data.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        std::uint32_t bits;
        std::memcpy(&bits, blob->data() + offset + k * sizeof(float), sizeof(bits));
        t.data[k] = std::bit_cast<float>(to_little_endian(bits));
      }
    }
    model.tensors.emplace(name, std::move(t));
  }
  return model;
}

}  // namespace

ModelGraph parse_model(std::string_view manifest, std::span<const std::uint8_t> blob) {
  ModelGraph model = parse_manifest(manifest, &blob);
  model.validate();
  return model;
}

ModelGraph load_manifest(const std::filesystem::path& manifest) {
  const auto text = read_file(manifest);
  try {
    ModelGraph model = parse_manifest(
        std::string_view(reinterpret_cast<const char*>(text.data()), text.size()),
        nullptr);
    model.validate_structure();
    return model;
  } catch (const Error& e) {
    throw Error(e.kind(), manifest.string() + ": " + e.what());
  }
}

ModelGraph load_model(const std::filesystem::path& manifest,
                      const std::filesystem::path& blob) {
  const auto text = read_file(manifest);
  const auto bytes = read_file(blob);
  try {
    return parse_model(std::string_view(reinterpret_cast<const char*>(text.data()),
                                        text.size()),
                       bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), manifest.string() + ": " + e.what());
  }
}

void save_model(const ModelGraph& model, const std::filesystem::path& manifest,
                const std::filesystem::path& blob) {
  model.validate();
  const std::string text = manifest_text(model);
  const auto bytes = blob_bytes(model);
  write_file(manifest, text.data(), text.size());
  write_file(blob, bytes.data(), bytes.size());
}

}  // namespace convkit
