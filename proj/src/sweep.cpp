#include "convkit/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

#include "convkit/parallel.hpp"
#include "convkit/plan.hpp"
#include "convkit/verify.hpp"

namespace convkit {

SweepDirection parse_direction(std::string_view s) {
  if (s == "single") return SweepDirection::single_layer;
  if (s == "front-to-back") return SweepDirection::front_to_back;
  if (s == "back-to-front") return SweepDirection::back_to_front;
  fail_usage("unknown sweep direction '" + std::string(s) +
             "' (expected single, front-to-back or back-to-front)");
}

std::string_view to_string(SweepDirection d) {
  switch (d) {
    case SweepDirection::single_layer: return "single";
    case SweepDirection::front_to_back: return "front-to-back";
    case SweepDirection::back_to_front: return "back-to-front";
  }
  return "?";
}

void SweepConfig::validate(const ModelGraph& model) const {
  if (ranks.empty()) fail_validation("sweep needs at least one rank");
  for (std::size_t r : ranks) {
    if (r == 0) fail_validation("sweep ranks must be positive");
  }
  if (direction == SweepDirection::single_layer) {
    if (layers.empty()) fail_validation("single-layer sweep needs at least one layer");
    if (!layer_counts.empty()) {
      fail_validation("layer counts only apply to front-to-back / back-to-front sweeps");
    }
    for (const auto& name : layers) {
      const LayerSpec* l = model.find_layer(name);
      if (!l) fail_validation("sweep names unknown layer '" + name + "'");
      if (l->kind != LayerKind::conv2d) {
        fail_validation("sweep layer '" + name + "' is not a conv2d layer");
      }
    }
  } else {
    if (layer_counts.empty()) fail_validation("multi-layer sweep needs layer counts");
    if (!layers.empty()) {
      fail_validation("named layers only apply to single-layer sweeps");
    }
  }
}

std::vector<SweepRow> run_sweep(const ModelGraph& model, const SweepConfig& config) {
  model.validate();
  config.validate(model);

  struct Job {
    std::string label;
    std::string selector;  // empty for a named single layer
    std::size_t count;
    std::size_t rank;
  };
  std::vector<Job> jobs;
  for (std::size_t rank : config.ranks) {
    if (config.direction == SweepDirection::single_layer) {
      for (const auto& name : config.layers) jobs.push_back({name, "", 1, rank});
    } else {
      const char* head =
          config.direction == SweepDirection::front_to_back ? "first:" : "last:";
      for (std::size_t count : config.layer_counts) {
        const std::string sel = head + std::to_string(count);
        jobs.push_back({sel, sel, count, rank});
      }
    }
  }

  const RankChoice choice{config.scheme == Scheme::dac ? RankChoice::Mode::value
                                                       : RankChoice::Mode::match_dac,
                          0};
  const Network reference(model);
  std::vector<SweepRow> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t k) {
    const Job& job = jobs[k];
    RankChoice rank = choice;
    rank.value = job.rank;
    DecompositionPlan plan;
    if (job.selector.empty()) {
      // Single named layer: build the one-entry plan via a uniform plan over
      // all layers, then keep the matching entry.
      for (auto& e : uniform_plan(model, config.scheme, rank, "all").entries) {
        if (e.layer == job.label) plan.entries.push_back(std::move(e));
      }
    } else {
      plan = uniform_plan(model, config.scheme, rank, job.selector);
    }
    for (auto& e : plan.entries) {
      const LayerSpec& layer = *model.find_layer(e.layer);
      e.rank = std::min(e.rank, max_rank(e.scheme, model.conv_weights(layer).weights.dims()));
    }
    const auto [decomposed, report] = apply_plan(model, plan);
    const Divergence d =
        verify_networks(reference, Network(decomposed), config.inputs, config.seed);
    rows[k] = {job.label,           job.count,       job.rank,
               report.saved_ratio(), report.total_frobenius_error(),
               d.max_abs_diff,      d.top1_agreement};
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%zu,%zu,%.9g,%.9g,%.9g,%.6g\n", r.layer_count,
                  r.rank, r.saved_ratio, r.frobenius_error, r.divergence,
                  r.top1_agreement);
    out += r.layers;
    out += buf;
  }
  return out;
}

}  // namespace convkit
