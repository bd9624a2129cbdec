#include "convkit/plan.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <string>
#include <variant>

#include "convkit/parallel.hpp"
#include "json.hpp"

namespace convkit {
namespace {

using nlohmann::json;

std::size_t parse_size(std::string_view s, const std::string& what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail_usage("invalid " + what + " '" + std::string(s) + "'");
  }
  return v;
}

Tensor4::Dims conv_shape(const LayerSpec& layer, std::size_t in_channels) {
  return {layer.filters, layer.kernel.w, layer.kernel.h, in_channels};
}

// New layers and tensors standing in for one conv2d.
struct Replacement {
  std::vector<LayerSpec> layers;
  std::vector<std::pair<std::string, StoredTensor>> tensors;
  double error = 0.0;
  double weight_norm = 0.0;
  std::size_t rank = 0;
};

StoredTensor stored(const Tensor4& t) {
  return {{t.n(), t.kw(), t.kh(), t.c()}, t.values()};
}

Replacement replace_layer(const ModelGraph& model, const LayerSpec& layer,
                          const PlanEntry& entry) {
  const ConvWeights w = model.conv_weights(layer);
  const std::size_t rank =
      entry.rank == kFullRank ? max_rank(entry.scheme, w.weights.dims()) : entry.rank;

  Replacement rep;
  rep.rank = rank;
  rep.weight_norm = frobenius_norm(w.weights);
  LayerSpec a{.name = layer.name + "/a"};
  LayerSpec b{.name = layer.name + "/b"};
  a.weight = a.name + "/weight";
  b.weight = b.name + "/weight";
  const bool bias = w.bias.has_value();
  if (bias) b.bias = b.name + "/bias";

  switch (entry.scheme) {
    case Scheme::dac: {
      const DecomposedPair p = dac_decompose(w, rank);
      a.kind = LayerKind::depthwise;
      a.multiplier = rank;
      a.kernel = layer.kernel;
      a.stride = p.depthwise.stride;
      a.padding = p.depthwise.padding;
      b.kind = LayerKind::pointwise;
      b.filters = layer.filters;
      rep.tensors.emplace_back(a.weight, stored(p.depthwise.weights));
      rep.tensors.emplace_back(b.weight, stored(p.pointwise.weights));
      rep.error = p.reconstruction_error;
      break;
    }
    case Scheme::channel: {
      const ChannelPair p = channel_decompose(w, rank);
      a.kind = LayerKind::conv2d;
      a.filters = rank;
      a.kernel = layer.kernel;
      a.stride = p.first.stride;
      a.padding = p.first.padding;
      b.kind = LayerKind::pointwise;
      b.filters = layer.filters;
      rep.tensors.emplace_back(a.weight, stored(p.first.weights));
      rep.tensors.emplace_back(b.weight, stored(p.second.weights));
      rep.error = p.reconstruction_error;
      break;
    }
    case Scheme::spatial: {
      const SpatialPair p = spatial_decompose(w, rank);
      a.kind = LayerKind::conv2d;
      a.filters = rank;
      a.kernel = {layer.kernel.w, 1};
      a.stride = p.horizontal.stride;
      a.padding = p.horizontal.padding;
      b.kind = LayerKind::conv2d;
      b.filters = layer.filters;
      b.kernel = {1, layer.kernel.h};
      b.stride = p.vertical.stride;
      b.padding = p.vertical.padding;
      rep.tensors.emplace_back(a.weight, stored(p.horizontal.weights));
      rep.tensors.emplace_back(b.weight, stored(p.vertical.weights));
      rep.error = p.reconstruction_error;
      break;
    }
  }
  if (bias) rep.tensors.emplace_back(b.bias, StoredTensor{{w.bias->size()}, *w.bias});
  rep.layers = {std::move(a), std::move(b)};
  return rep;
}

}  // namespace

void DecompositionPlan::validate(const ModelGraph& model) const {
  const auto traces = model.trace();
  std::set<std::string_view> skipped;
  for (const auto& name : skip) {
    if (!model.find_layer(name)) {
      fail_validation("plan skip-list names unknown layer '" + name + "'");
    }
    skipped.insert(name);
  }
  std::set<std::string_view> seen;
  for (const auto& e : entries) {
    const LayerSpec* layer = model.find_layer(e.layer);
    if (!layer) fail_validation("plan names unknown layer '" + e.layer + "'");
    if (layer->kind != LayerKind::conv2d) {
      fail_validation("plan entry '" + e.layer + "' is a " +
                      std::string(to_string(layer->kind)) + " layer, not conv2d");
    }
    if (!seen.insert(e.layer).second) {
      fail_validation("plan lists layer '" + e.layer + "' twice");
    }
    if (skipped.count(e.layer)) {
      fail_validation("plan entry '" + e.layer + "' is also on the skip-list");
    }
    const std::size_t index = static_cast<std::size_t>(layer - model.layers.data());
    const std::size_t hi = max_rank(e.scheme, conv_shape(*layer, traces[index].input.c));
    if (e.rank != kFullRank && (e.rank < 1 || e.rank > hi)) {
      fail_validation("plan entry '" + e.layer + "': " + std::string(to_string(e.scheme)) +
                      " rank " + std::to_string(e.rank) + " outside [1, " +
                      std::to_string(hi) + "]");
    }
  }
}

double DecompositionReport::saved_ratio() const {
  if (model_macs_before == 0) return 0.0;
  return 1.0 - static_cast<double>(model_macs_after) /
                   static_cast<double>(model_macs_before);
}

double DecompositionReport::total_frobenius_error() const {
  double sum = 0.0;
  for (const auto& l : layers) sum += l.frobenius_error * l.frobenius_error;
  return std::sqrt(sum);
}

std::vector<std::string> select_conv_layers(const ModelGraph& model,
                                            std::string_view selector) {
  std::vector<std::string> convs;
  for (const auto& l : model.layers) {
    if (l.kind == LayerKind::conv2d) convs.push_back(l.name);
  }
  if (selector == "all") return convs;
  if (selector == "all-but-first") {
    if (!convs.empty()) convs.erase(convs.begin());
    return convs;
  }
  const auto colon = selector.find(':');
  if (colon != std::string_view::npos) {
    const auto head = selector.substr(0, colon);
    const std::size_t k = parse_size(selector.substr(colon + 1), "layer count");
    if (k > convs.size()) {
      fail_validation("selector '" + std::string(selector) + "' asks for " +
                      std::to_string(k) + " conv layers, model has " +
                      std::to_string(convs.size()));
    }
    if (head == "first") return {convs.begin(), convs.begin() + k};
    if (head == "last") return {convs.end() - k, convs.end()};
  }
  fail_usage("unknown layer selector '" + std::string(selector) +
             "' (expected all, all-but-first, first:K or last:K)");
}

RankChoice parse_rank_choice(std::string_view rank) {
  if (rank == "full") return {RankChoice::Mode::full, 0};
  const std::size_t v = parse_size(rank, "rank");
  if (v == 0) fail_usage("rank must be at least 1");
  return {RankChoice::Mode::value, v};
}

DecompositionPlan uniform_plan(const ModelGraph& model, Scheme scheme, RankChoice rank,
                               std::string_view selector,
                               const std::vector<std::string>& skip) {
  const auto traces = model.trace();
  DecompositionPlan plan;
  plan.skip = skip;
  const std::set<std::string> skipped(skip.begin(), skip.end());
  for (const auto& name : select_conv_layers(model, selector)) {
    if (skipped.count(name)) continue;
    PlanEntry e{name, scheme, kFullRank};
    if (rank.mode == RankChoice::Mode::value) {
      e.rank = rank.value;
    } else if (rank.mode == RankChoice::Mode::match_dac) {
      const LayerSpec* layer = model.find_layer(name);
      const std::size_t index = static_cast<std::size_t>(layer - model.layers.data());
      e.rank = match_rank(conv_shape(*layer, traces[index].input.c), rank.value, scheme);
    }
    plan.entries.push_back(std::move(e));
  }
  return plan;
}

std::pair<ModelGraph, DecompositionReport> apply_plan(const ModelGraph& model,
                                                      const DecompositionPlan& plan) {
  model.validate();
  plan.validate(model);

  std::vector<Replacement> reps(plan.entries.size());
  parallel_for(plan.entries.size(), [&](std::size_t k) {
    const PlanEntry& e = plan.entries[k];
    reps[k] = replace_layer(model, *model.find_layer(e.layer), e);
  });

  ModelGraph out;
  out.input = model.input;
  out.tensors = model.tensors;
  std::map<std::string, std::size_t> planned;
  for (std::size_t k = 0; k < plan.entries.size(); ++k) planned[plan.entries[k].layer] = k;

  for (const auto& layer : model.layers) {
    auto it = planned.find(layer.name);
    if (it == planned.end()) {
      out.layers.push_back(layer);
      continue;
    }
    out.tensors.erase(layer.weight);
    if (!layer.bias.empty()) out.tensors.erase(layer.bias);
    Replacement& rep = reps[it->second];
    for (auto& l : rep.layers) out.layers.push_back(std::move(l));
    for (auto& [name, t] : rep.tensors) {
      if (!out.tensors.emplace(name, std::move(t)).second) {
        fail_validation("decomposition of '" + layer.name + "' would overwrite tensor '" +
                        name + "'");
      }
    }
  }
  // A tensor shared with an untouched layer must survive.
  for (const auto& layer : model.layers) {
    if (planned.count(layer.name)) continue;
    for (const auto* name : {&layer.weight, &layer.bias}) {
      if (!name->empty()) out.tensors.emplace(*name, model.tensors.at(*name));
    }
  }
  out.validate();

  const auto before = model.trace();
  const auto after = out.trace();
  DecompositionReport report;
  for (const auto& t : before) report.model_macs_before += t.macs;
  for (const auto& t : after) report.model_macs_after += t.macs;

  std::map<std::string_view, std::uint64_t> macs_after;
  for (const auto& t : after) macs_after[t.name] = t.macs;
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    const PlanEntry& e = plan.entries[k];
    LayerReport r;
    r.name = e.layer;
    r.scheme = e.scheme;
    r.rank = reps[k].rank;
    r.frobenius_error = reps[k].error;
    r.relative_error = reps[k].weight_norm > 0.0 ? reps[k].error / reps[k].weight_norm : 0.0;
    for (const auto& t : before) {
      if (t.name == e.layer) r.macs_before = t.macs;
    }
    r.macs_after = macs_after[e.layer + "/a"] + macs_after[e.layer + "/b"];
    report.layer_macs_before += r.macs_before;
    report.layer_macs_after += r.macs_after;
    report.layers.push_back(std::move(r));
  }
  return {std::move(out), std::move(report)};
}

DecompositionPlan parse_plan(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail_validation(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    fail_validation("plan must be an object with an 'entries' array");
  }
  DecompositionPlan plan;
  for (const auto& e : j["entries"]) {
    if (!e.is_object() || !e.contains("layer") || !e["layer"].is_string() ||
        !e.contains("scheme") || !e["scheme"].is_string()) {
      fail_validation("plan entries need string 'layer' and 'scheme'");
    }
    PlanEntry entry;
    entry.layer = e["layer"].get<std::string>();
    try {
      entry.scheme = parse_scheme(e["scheme"].get<std::string>());
    } catch (const Error& err) {
      fail_validation(err.what());
    }
    if (!e.contains("rank") || (e["rank"].is_string() && e["rank"] == "full")) {
      entry.rank = kFullRank;
    } else if (e["rank"].is_number_unsigned() && e["rank"].get<std::size_t>() > 0) {
      entry.rank = e["rank"].get<std::size_t>();
    } else {
      fail_validation("plan entry '" + entry.layer +
                      "': 'rank' must be a positive integer or \"full\"");
    }
    plan.entries.push_back(std::move(entry));
  }
  if (j.contains("skip")) {
    if (!j["skip"].is_array()) fail_validation("plan 'skip' must be an array");
    for (const auto& s : j["skip"]) {
      if (!s.is_string()) fail_validation("plan 'skip' entries must be layer names");
      plan.skip.push_back(s.get<std::string>());
    }
  }
  return plan;
}

std::string plan_json(const DecompositionPlan& plan) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : plan.entries) {
    json entry{{"layer", e.layer}, {"scheme", std::string(to_string(e.scheme))}};
    if (e.rank == kFullRank) {
      entry["rank"] = "full";
    } else {
      entry["rank"] = e.rank;
    }
    j["entries"].push_back(std::move(entry));
  }
  j["skip"] = plan.skip;
  return j.dump(2) + "\n";
}

std::string report_json(const DecompositionReport& report) {
  json j;
  j["layers"] = json::array();
  for (const auto& l : report.layers) {
    j["layers"].push_back({{"name", l.name},
                           {"scheme", std::string(to_string(l.scheme))},
                           {"rank", l.rank},
                           {"frobenius_error", l.frobenius_error},
                           {"relative_error", l.relative_error},
                           {"macs_before", l.macs_before},
                           {"macs_after", l.macs_after}});
  }
  j["totals"] = {{"layer_macs_before", report.layer_macs_before},
                 {"layer_macs_after", report.layer_macs_after},
                 {"model_macs_before", report.model_macs_before},
                 {"model_macs_after", report.model_macs_after},
                 {"frobenius_error", report.total_frobenius_error()},
                 {"saved_ratio", report.saved_ratio()}};
  return j.dump(2) + "\n";
}

}  // namespace convkit
