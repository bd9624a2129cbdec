#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "convkit/plan.hpp"
#include "convkit/sweep.hpp"
#include "convkit/synthetic.hpp"
#include "convkit/verify.hpp"

namespace convkit {
namespace {

ModelGraph tiny_vgg() { return make_cifar_vgg({.seed = 11}, 16); }

ModelGraph three_convs() {
  return ModelBuilder({10, 10, 4}, {.seed = 4})
      .conv3x3("conv2d_1", 8)
      .relu("relu_1")
      .conv3x3("conv2d_2", 8)
      .relu("relu_2")
      .conv("conv2d_3", 6, {3, 3}, {2, 2}, {1, 1})
      .flatten("flatten")
      .dense("dense_1", 4)
      .build();
}

TEST(Plan, EmptyPlanChangesNothing) {
  const ModelGraph m = three_convs();
  const auto [out, report] = apply_plan(m, {});
  EXPECT_EQ(out, m);
  EXPECT_EQ(report.saved_ratio(), 0.0);
  EXPECT_TRUE(report.layers.empty());
  EXPECT_EQ(report.model_macs_before, m.total_macs());
}

TEST(Plan, FullRankDacPreservesOutputs) {
  const ModelGraph m = tiny_vgg();
  const auto plan = uniform_plan(m, Scheme::dac, {RankChoice::Mode::full}, "all-but-first");
  EXPECT_EQ(plan.entries.size(), 12u);
  const auto [out, report] = apply_plan(m, plan);
  const Divergence d = verify_models(m, out, 10, 0);
  EXPECT_LE(d.max_abs_diff, 1e-3);
  EXPECT_EQ(d.top1_agreement, 100.0);
  EXPECT_LT(report.saved_ratio(), 0.0);
  EXPECT_LE(report.total_frobenius_error(), 1e-4);
}

TEST(Plan, SubstitutionIsLocal) {
  const ModelGraph m = three_convs();
  const auto [out, report] =
      apply_plan(m, {.entries = {{"conv2d_2", Scheme::dac, 2}}});
  ASSERT_EQ(out.layers.size(), m.layers.size() + 1);
  EXPECT_EQ(out.layers[0], m.layers[0]);
  EXPECT_EQ(out.layers[1], m.layers[1]);
  EXPECT_EQ(out.layers[2].name, "conv2d_2/a");
  EXPECT_EQ(out.layers[2].kind, LayerKind::depthwise);
  EXPECT_EQ(out.layers[3].name, "conv2d_2/b");
  EXPECT_EQ(out.layers[3].kind, LayerKind::pointwise);
  for (std::size_t k = 4; k < out.layers.size(); ++k) EXPECT_EQ(out.layers[k], m.layers[k - 1]);
  for (const auto& [name, t] : m.tensors) {
    if (name.rfind("conv2d_2/", 0) == 0) {
      EXPECT_FALSE(out.tensors.contains(name)) << name;
    } else {
      EXPECT_EQ(out.tensors.at(name), t) << name;
    }
  }
  EXPECT_TRUE(out.tensors.contains("conv2d_2/b/bias"));
  EXPECT_NO_THROW(out.validate());
}

TEST(Plan, SchemesProduceExpectedLayerKinds) {
  const ModelGraph m = three_convs();
  auto [ch, r1] = apply_plan(m, {.entries = {{"conv2d_3", Scheme::channel, 3}}});
  const LayerSpec* a = ch.find_layer("conv2d_3/a");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->kind, LayerKind::conv2d);
  EXPECT_EQ(a->filters, 3u);
  EXPECT_EQ(a->stride, (Extent2{2, 2}));
  EXPECT_EQ(ch.find_layer("conv2d_3/b")->kind, LayerKind::pointwise);

  auto [sp, r2] = apply_plan(m, {.entries = {{"conv2d_3", Scheme::spatial, 3}}});
  const LayerSpec* h = sp.find_layer("conv2d_3/a");
  const LayerSpec* v = sp.find_layer("conv2d_3/b");
  EXPECT_EQ(h->kernel, (Extent2{3, 1}));
  EXPECT_EQ(v->kernel, (Extent2{1, 3}));
  EXPECT_EQ(h->stride, (Extent2{2, 1}));
  EXPECT_EQ(v->stride, (Extent2{1, 2}));
  EXPECT_EQ(sp.trace().back().output, m.trace().back().output);
}

TEST(Plan, ReportAgreesWithForwardCounter) {
  const ModelGraph m = three_convs();
  DecompositionPlan plan{.entries = {{"conv2d_1", Scheme::dac, 2},
                                     {"conv2d_2", Scheme::channel, 5},
                                     {"conv2d_3", Scheme::spatial, 4}}};
  const auto [out, report] = apply_plan(m, plan);
  MacCounter before, after;
  Network(m).forward(FeatureMap(10, 10, 4), before);
  Network(out).forward(FeatureMap(10, 10, 4), after);
  EXPECT_EQ(report.model_macs_before, before.total());
  EXPECT_EQ(report.model_macs_after, after.total());
  EXPECT_DOUBLE_EQ(report.saved_ratio(),
                   1.0 - double(after.total()) / double(before.total()));
  ASSERT_EQ(report.layers.size(), 3u);
  std::uint64_t sum_before = 0, sum_after = 0;
  for (const auto& l : report.layers) {
    sum_before += l.macs_before;
    sum_after += l.macs_after;
    EXPECT_GT(l.frobenius_error, 0.0);
    EXPECT_LT(l.relative_error, 1.0);
  }
  EXPECT_EQ(report.layer_macs_before, sum_before);
  EXPECT_EQ(report.layer_macs_after, sum_after);
}

TEST(Plan, DacRankSweepErrorNonIncreasing) {
  const ModelGraph m = three_convs();
  double previous = INFINITY;
  for (std::size_t r = 1; r <= 8; ++r) {
    const auto [out, report] = apply_plan(m, {.entries = {{"conv2d_2", Scheme::dac, r}}});
    const double e = report.total_frobenius_error();
    EXPECT_LE(e, previous) << r;
    previous = e;
  }
  EXPECT_LE(previous, 1e-5);
}

TEST(Plan, ValidationErrors) {
  const ModelGraph m = three_convs();
  auto expect_invalid = [&](DecompositionPlan p) {
    try {
      p.validate(m);
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::validation);
    }
  };
  expect_invalid({.entries = {{"conv2d_9", Scheme::dac, 1}}});
  expect_invalid({.entries = {{"relu_1", Scheme::dac, 1}}});
  expect_invalid({.entries = {{"conv2d_1", Scheme::dac, 1}, {"conv2d_1", Scheme::dac, 2}}});
  expect_invalid({.entries = {{"conv2d_1", Scheme::dac, 1}}, .skip = {"conv2d_1"}});
  expect_invalid({.entries = {{"conv2d_1", Scheme::dac, 9}}});
  expect_invalid({.skip = {"nope"}});
  EXPECT_NO_THROW(DecompositionPlan({.entries = {{"conv2d_1", Scheme::dac, 8}}}).validate(m));
}

TEST(Plan, JsonRoundTripAndErrors) {
  DecompositionPlan p{.entries = {{"conv2d_1", Scheme::dac, 3},
                                  {"conv2d_2", Scheme::spatial, kFullRank}},
                      .skip = {"conv2d_3"}};
  const DecompositionPlan back = parse_plan(plan_json(p));
  EXPECT_EQ(back.entries, p.entries);
  EXPECT_EQ(back.skip, p.skip);
  EXPECT_EQ(parse_plan(R"({"entries":[{"layer":"x","scheme":"dac","rank":"full"}]})")
                .entries[0].rank,
            kFullRank);
  EXPECT_THROW(parse_plan("[]"), Error);
  EXPECT_THROW(parse_plan(R"({"entries":[{"layer":"x","scheme":"cp","rank":1}]})"), Error);
  EXPECT_THROW(parse_plan(R"({"entries":[{"layer":"x","scheme":"dac","rank":-1}]})"), Error);
}

TEST(Plan, Selectors) {
  const ModelGraph m = three_convs();
  using V = std::vector<std::string>;
  EXPECT_EQ(select_conv_layers(m, "all"), (V{"conv2d_1", "conv2d_2", "conv2d_3"}));
  EXPECT_EQ(select_conv_layers(m, "all-but-first"), (V{"conv2d_2", "conv2d_3"}));
  EXPECT_EQ(select_conv_layers(m, "first:2"), (V{"conv2d_1", "conv2d_2"}));
  EXPECT_EQ(select_conv_layers(m, "last:1"), (V{"conv2d_3"}));
  EXPECT_THROW(select_conv_layers(m, "last:4"), Error);
  EXPECT_THROW(select_conv_layers(m, "middle"), Error);
}

TEST(Plan, UniformMatchDacUsesMatchRank) {
  const ModelGraph m = three_convs();
  const auto p = uniform_plan(m, Scheme::channel, {RankChoice::Mode::match_dac, 2}, "all",
                              {"conv2d_1"});
  ASSERT_EQ(p.entries.size(), 2u);
  EXPECT_EQ(p.entries[0].rank, match_rank({8, 3, 3, 8}, 2, Scheme::channel));
  EXPECT_EQ(p.entries[1].rank, match_rank({6, 3, 3, 8}, 2, Scheme::channel));
  EXPECT_EQ(p.skip, std::vector<std::string>{"conv2d_1"});
}

TEST(Sweep, SingleLayerRowsAndMonotonicity) {
  const ModelGraph m = three_convs();
  SweepConfig cfg{.ranks = {1, 2, 3, 4, 5}, .layers = {"conv2d_2"}, .inputs = 4};
  const auto rows = run_sweep(m, cfg);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].rank, k + 1);
    EXPECT_LE(rows[k].frobenius_error, rows[k - 1].frobenius_error);
    EXPECT_LT(rows[k].saved_ratio, rows[k - 1].saved_ratio);
  }
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, kSweepCsvHeader.size()), kSweepCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Sweep, BackToFrontFullRankIsNearlyExact) {
  const ModelGraph m = three_convs();
  SweepConfig cfg{.ranks = {9}, .direction = SweepDirection::back_to_front,
                  .layer_counts = {1, 2, 3}, .inputs = 4};
  for (const auto& row : run_sweep(m, cfg)) {
    EXPECT_LE(row.divergence, 1e-3) << row.layers;
    EXPECT_EQ(row.top1_agreement, 100.0);
  }
}

// Quarter-width VGG without biases, fixed seed. Early rank-1 errors
// propagate through every later layer, so the output divergence grows as
// more of the front is decomposed.
ModelGraph deep_model() { return make_cifar_vgg({.seed = 1, .bias = false}, 4); }

TEST(Sweep, FrontToBackDivergenceGrowsWithDepth) {
  const ModelGraph m = deep_model();
  std::vector<std::size_t> counts(13);
  std::iota(counts.begin(), counts.end(), 1);
  SweepConfig cfg{.ranks = {1}, .direction = SweepDirection::front_to_back,
                  .layer_counts = counts, .inputs = 10};
  const auto rows = run_sweep(m, cfg);
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[0].layers, "first:1");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_GE(rows[k].divergence, rows[k - 1].divergence) << rows[k].layers;
    EXPECT_GT(rows[k].saved_ratio, rows[k - 1].saved_ratio);
  }
}

TEST(Sweep, ConfigValidation) {
  const ModelGraph m = three_convs();
  EXPECT_THROW(SweepConfig({.ranks = {}}).validate(m), Error);
  EXPECT_THROW(SweepConfig({.ranks = {1}, .layers = {"relu_1"}}).validate(m), Error);
  EXPECT_THROW(SweepConfig({.ranks = {1}, .direction = SweepDirection::front_to_back})
                   .validate(m),
               Error);
  EXPECT_THROW(parse_direction("sideways"), Error);
}

TEST(Verify, DeterministicAndSelfConsistent) {
  const ModelGraph m = three_convs();
  const Divergence self = verify_models(m, m, 5, 1);
  EXPECT_EQ(self.max_abs_diff, 0.0);
  EXPECT_EQ(self.mean_rel_diff, 0.0);
  EXPECT_EQ(self.top1_agreement, 100.0);
  const auto [out, report] = apply_plan(m, {.entries = {{"conv2d_2", Scheme::dac, 1}}});
  const Divergence a = verify_models(m, out, 5, 2), b = verify_models(m, out, 5, 2);
  EXPECT_EQ(a.max_abs_diff, b.max_abs_diff);
  EXPECT_EQ(a.mean_rel_diff, b.mean_rel_diff);
  EXPECT_GT(a.max_abs_diff, 0.0);
  EXPECT_EQ(divergence_json(a), divergence_json(b));
}

TEST(Verify, RankOneDeepModelLosesAgreement) {
  const ModelGraph m = deep_model();
  const auto full = apply_plan(m, uniform_plan(m, Scheme::dac, {RankChoice::Mode::full}, "all"));
  const auto low = apply_plan(m, uniform_plan(m, Scheme::dac, {RankChoice::Mode::value, 1}, "all"));
  const Divergence a = verify_models(m, full.first, 20, 0);
  const Divergence b = verify_models(m, low.first, 20, 0);
  EXPECT_EQ(a.top1_agreement, 100.0);
  EXPECT_LT(b.top1_agreement, a.top1_agreement);
  EXPECT_GT(b.max_abs_diff, a.max_abs_diff);
}

TEST(Rng, KnownSequenceAndRanges) {
  Rng a(42), b(42), c(43);
  EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(42).next(), c.next());
  SplitMix64 sm(0);
  EXPECT_EQ(sm.next(), 0xE220A8397B1DCDAFull);
  Rng r(7);
  for (int k = 0; k < 1000; ++k) {
    const float u = r.uniform_pm1();
    EXPECT_GE(u, -1.0f);
    EXPECT_LE(u, 1.0f);
    const auto i = r.uniform_int(3, 5);
    EXPECT_GE(i, 3u);
    EXPECT_LE(i, 5u);
  }
}

}  // namespace
}  // namespace convkit
