// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.
//
//   convkit_acceptance                  run every criterion
//   convkit_acceptance 2 5              run only criteria 2 and 5
//   convkit_acceptance --write-fixture  regenerate tests/fixtures/golden.*

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "convkit/decompose.hpp"
#include "convkit/model.hpp"
#include "convkit/plan.hpp"
#include "convkit/synthetic.hpp"
#include "convkit/verify.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace convkit;

namespace {

// Tolerances.
constexpr double kIdentityMaxDiff = 1e-3;
constexpr double kIdentitySeconds = 60.0;
constexpr double kTailRelTol = 1e-6;
constexpr double kOptimalitySlack = 1e-6;  // relative, absorbs float factor rounding
constexpr double kOptimalitySeconds = 120.0;
constexpr double kMatchedMacTol = 0.02;
constexpr double kMaxRankRelError = 1e-5;
constexpr double kConvRelTol = 1e-5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Full-rank DAC on every conv but the first leaves outputs unchanged.
Outcome full_rank_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelGraph model = make_cifar_vgg({.seed = 1});
  const auto plan = uniform_plan(model, Scheme::dac, {RankChoice::Mode::full}, "all-but-first");
  const auto [decomposed, report] = apply_plan(model, plan);
  const Divergence d = verify_models(model, decomposed, 100, 0);
  const double secs = seconds_since(t0);
  return {d.top1_agreement == 100.0 && d.max_abs_diff <= kIdentityMaxDiff &&
              secs < kIdentitySeconds,
          fmt("%zu layers, top-1 %.1f%%, max |diff| %.3g, %.1f s", plan.entries.size(),
              d.top1_agreement, d.max_abs_diff, secs)};
}

// 2. Per channel, DAC beats random rank-r factorizations, and the total error
// equals the singular tail energy from an independent eigen-solver.
Outcome eckart_young() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  Outcome out;
  std::size_t checks = 0;
  double worst_tail = 0.0, worst_margin = -INFINITY;
  for (int layer = 0; layer < 50; ++layer) {
    const Tensor4::Dims d{rng.uniform_int(1, 16), rng.uniform_int(1, 5), rng.uniform_int(1, 5),
                          rng.uniform_int(1, 8)};
    const ConvWeights w{testing::random_tensor(d, rng)};
    std::vector<Matrix> slices;
    for (std::size_t i = 0; i < d[3]; ++i) slices.push_back(channel_slice(w.weights, i));
    const double norm = frobenius_norm(w.weights);

    for (std::size_t r = 1; r <= dac_max_rank(d); ++r) {
      const DecomposedPair pair = dac_decompose(w, r);
      const Tensor4 approx = reconstruct(pair);
      double tail_sq = 0.0;
      for (std::size_t i = 0; i < d[3]; ++i) {
        const Matrix got = channel_slice(approx, i);
        double err = 0.0;
        for (std::size_t k = 0; k < got.size(); ++k) {
          const double diff = double(slices[i].data()[k]) - got.data()[k];
          err += diff * diff;
        }
        err = std::sqrt(err);
        const double best = testing::best_random_factorization(slices[i], r, 1000, rng);
        worst_margin = std::max(worst_margin, err - best);
        if (err > best + kOptimalitySlack * frobenius_norm(slices[i])) {
          out.pass = false;
          out.detail = fmt("layer %d rank %zu channel %zu: %.9g > random %.9g; ", layer, r, i,
                           err, best);
        }
        const double t = testing::oracle_tail(slices[i], r);
        tail_sq += t * t;
        ++checks;
      }
      const double tail = std::sqrt(tail_sq);
      // At full rank the tail is zero and only float rounding of the factors
      // remains, so the comparison is against the layer norm.
      const double scale = r == dac_max_rank(d) ? norm : tail;
      const double rel = std::abs(pair.reconstruction_error - tail) / scale;
      worst_tail = std::max(worst_tail, rel);
      if (rel > kTailRelTol) {
        out.pass = false;
        out.detail += fmt("layer %d rank %zu: error %.12g vs tail %.12g; ", layer, r,
                          pair.reconstruction_error, tail);
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= kOptimalitySeconds) out.pass = false;
  out.detail += fmt("%zu channel checks, worst tail rel diff %.3g, max (dac - best random) "
                    "%.3g, %.1f s",
                    checks, worst_tail, worst_margin, secs);
  return out;
}

// 3. Measured DAC MACs over conv MACs equals r/n + r/(k_w k_h) exactly.
Outcome mac_ratio() {
  Rng rng(3);
  Outcome out;
  std::size_t pairs = 0;
  for (int shape = 0; shape < 24; ++shape) {
    const std::size_t kw = 2 * rng.uniform_int(0, 3) + 1, kh = 2 * rng.uniform_int(0, 3) + 1;
    const Tensor4::Dims d{rng.uniform_int(1, 48), kw, kh, rng.uniform_int(1, 12)};
    const ConvWeights w{testing::random_tensor(d, rng), std::nullopt, {1, 1}, {kw / 2, kh / 2}};
    const FeatureMap f = testing::random_map(rng.uniform_int(kw, 12), rng.uniform_int(kh, 12),
                                             d[3], rng);
    MacCounter before;
    const FeatureMap ref = conv2d(f, w, before);
    for (std::size_t r = 1; r <= dac_max_rank(d); ++r) {
      const DecomposedPair p = dac_decompose(w, r);
      MacCounter after;
      const FeatureMap got = pointwise_conv(depthwise_conv(f, p.depthwise, after), p.pointwise,
                                            after);
      // after / before == r/n + r/(kw kh)  <=>  after * n * kw kh == before * r * (kw kh + n)
      const std::uint64_t lhs = after.total() * d[0] * kw * kh;
      const std::uint64_t rhs = before.total() * r * (kw * kh + d[0]);
      if (lhs != rhs || got.width() != ref.width() || got.height() != ref.height()) {
        out.pass = false;
        out.detail += fmt("n=%zu c=%zu k=%zux%zu r=%zu: %llu != %llu; ", d[0], d[3], kw, kh, r,
                          (unsigned long long)lhs, (unsigned long long)rhs);
      }
      ++pairs;
    }
  }
  out.detail += fmt("24 shapes, %zu (shape, rank) pairs", pairs);
  return out;
}

// 4. Rank matching on VGG16 layer shapes.
Outcome rank_matching() {
  Outcome out;
  const Tensor4::Dims probe{256, 3, 3, 256};
  const std::size_t cc = match_rank(probe, 5, Scheme::channel);
  const std::size_t cs = match_rank(probe, 5, Scheme::spatial);
  if (cc != 133 || cs != 221) out.pass = false;
  out.detail = fmt("256/3x3/256: c'_c=%zu c'_s=%zu; ", cc, cs);

  // (c, n) of the VGG16 3x3 convs after the RGB input layer, measured on a
  // 14x14 map through the real decomposition and MAC counter.
  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
      {64, 64}, {64, 128}, {128, 128}, {128, 256}, {256, 256}, {256, 512}, {512, 512}};
  double worst = 0.0;
  for (const auto& [c, n] : shapes) {
    const ModelGraph m = ModelBuilder({14, 14, c}, {.seed = 4}).conv3x3("conv", n).build();
    const auto dac = apply_plan(m, {.entries = {{"conv", Scheme::dac, 5}}}).second;
    for (Scheme s : {Scheme::channel, Scheme::spatial}) {
      const auto rep = apply_plan(m, uniform_plan(m, s, {RankChoice::Mode::match_dac, 5}, "all"))
                           .second;
      const double ratio = double(rep.model_macs_after) / double(dac.model_macs_after);
      worst = std::max(worst, std::abs(ratio - 1.0));
      if (std::abs(ratio - 1.0) > kMatchedMacTol) {
        out.pass = false;
        out.detail += fmt("%zu->%zu %s MACs off by %.2f%%; ", c, n,
                          std::string(to_string(s)).c_str(), 100 * (ratio - 1.0));
      }
    }
  }
  // The RGB input layer (c = 3) is recorded only: c'_s = 5.45 before rounding,
  // so half a filter is already an 8% MAC step.
  const Tensor4::Dims first{64, 3, 3, 3};
  const double dac_first = 5.0 * 3 * 9 + 5.0 * 3 * 64;
  const double ch_first = double(match_rank(first, 5, Scheme::channel)) * (27 + 64);
  const double sp_first = double(match_rank(first, 5, Scheme::spatial)) * (9 + 192);
  out.detail += fmt("worst matched MAC gap %.2f%% over %zu shapes; RGB layer (recorded) "
                    "channel %+.2f%% spatial %+.2f%%",
                    100 * worst, shapes.size(), 100 * (ch_first / dac_first - 1),
                    100 * (sp_first / dac_first - 1));
  return out;
}

// 5. Error is non-increasing in rank for every scheme, and negligible at the
// maximum rank.
Outcome monotonicity() {
  Rng rng(5);
  Outcome out;
  std::size_t layers = 0;
  double worst_full = 0.0;
  std::vector<Tensor4::Dims> dims = {{64, 3, 3, 32}, {16, 5, 5, 8}, {32, 1, 1, 16}, {8, 7, 1, 4}};
  for (int k = 0; k < 16; ++k) {
    dims.push_back({rng.uniform_int(1, 24), rng.uniform_int(1, 5), rng.uniform_int(1, 5),
                    rng.uniform_int(1, 12)});
  }
  for (const auto& d : dims) {
    const ConvWeights w{testing::random_tensor(d, rng)};
    const double norm = frobenius_norm(w.weights);
    for (Scheme s : {Scheme::dac, Scheme::channel, Scheme::spatial}) {
      double prev = INFINITY;
      const std::size_t top = max_rank(s, d);
      for (std::size_t r = 1; r <= top; ++r) {
        double e = 0.0;
        switch (s) {
          case Scheme::dac: e = dac_decompose(w, r).reconstruction_error; break;
          case Scheme::channel: e = channel_decompose(w, r).reconstruction_error; break;
          case Scheme::spatial: e = spatial_decompose(w, r).reconstruction_error; break;
        }
        if (e > prev) {
          out.pass = false;
          out.detail += fmt("%s (%zu,%zu,%zu,%zu) rank %zu: %.9g > %.9g; ",
                            std::string(to_string(s)).c_str(), d[0], d[1], d[2], d[3], r, e,
                            prev);
        }
        prev = e;
      }
      worst_full = std::max(worst_full, prev / norm);
      if (prev > kMaxRankRelError * norm) {
        out.pass = false;
        out.detail += fmt("%s max-rank error %.3g; ", std::string(to_string(s)).c_str(),
                          prev / norm);
      }
      ++layers;
    }
  }
  out.detail += fmt("%zu (layer, scheme) sweeps, worst max-rank relative error %.3g", layers,
                    worst_full);
  return out;
}

// 6. At a matched ~60% MAC saving, DAC diverges no more than channel
// decomposition on the smooth-kernel deep model. The i.i.d.-weight model and
// the spatial scheme are reported, not asserted.
struct SchemeRun {
  double saved;
  double divergence;
};

SchemeRun run_scheme(const ModelGraph& m, Scheme s) {
  const RankChoice rank = s == Scheme::dac ? RankChoice{RankChoice::Mode::value, 3}
                                           : RankChoice{RankChoice::Mode::match_dac, 3};
  const auto [out, report] = apply_plan(m, uniform_plan(m, s, rank, "all-but-first"));
  return {report.saved_ratio(), verify_models(m, out, 10, 0).max_abs_diff};
}

Outcome scheme_ordering() {
  Outcome out;
  for (double decay : {0.5, 1.0}) {
    const ModelGraph m = make_cifar_vgg({.seed = 1, .spatial_decay = decay});
    const SchemeRun dac = run_scheme(m, Scheme::dac);
    const SchemeRun ch = run_scheme(m, Scheme::channel);
    const SchemeRun sp = run_scheme(m, Scheme::spatial);
    out.detail += fmt("%s decay %.1f: saved dac %.1f%% channel %.1f%% spatial %.1f%%, "
                      "max |diff| dac %.4g channel %.4g spatial %.4g; ",
                      decay < 1.0 ? "smooth" : "iid (recorded)", decay, 100 * dac.saved,
                      100 * ch.saved, 100 * sp.saved, dac.divergence, ch.divergence,
                      sp.divergence);
    if (decay < 1.0 && !(dac.divergence <= ch.divergence)) out.pass = false;
  }
  out.detail.resize(out.detail.size() - 2);
  return out;
}

// Golden fixture: every layer kind, values from uniform_pm1 only so the bytes
// depend on integer arithmetic alone.
ModelGraph fixture_model() {
  Rng rng(7);
  auto values = [&](std::vector<std::size_t> dims) {
    StoredTensor t{dims, {}};
    t.data.resize(t.element_count());
    for (float& v : t.data) v = rng.uniform_pm1();
    return t;
  };
  ModelGraph m;
  m.input = {6, 6, 2};
  m.layers = {
      {.name = "conv", .kind = LayerKind::conv2d, .filters = 4, .kernel = {3, 3},
       .padding = {1, 1}, .weight = "conv/weight", .bias = "conv/bias"},
      {.name = "conv_relu", .kind = LayerKind::relu},
      {.name = "dw", .kind = LayerKind::depthwise, .multiplier = 2, .kernel = {3, 1},
       .stride = {1, 1}, .padding = {1, 0}, .weight = "dw/weight"},
      {.name = "pw", .kind = LayerKind::pointwise, .filters = 5, .weight = "pw/weight",
       .bias = "pw/bias"},
      {.name = "pool", .kind = LayerKind::maxpool2},
      {.name = "flatten", .kind = LayerKind::flatten},
      {.name = "dense", .kind = LayerKind::dense, .filters = 3, .weight = "dense/weight",
       .bias = "dense/bias"},
  };
  m.tensors["conv/weight"] = values({4, 3, 3, 2});
  m.tensors["conv/bias"] = values({4});
  m.tensors["dw/weight"] = values({8, 3, 1, 1});
  m.tensors["pw/weight"] = values({5, 1, 1, 8});
  m.tensors["pw/bias"] = values({5});
  m.tensors["dense/weight"] = values({3, 45});
  m.tensors["dense/bias"] = values({3});
  m.validate();
  return m;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 7. Save -> load -> save is byte-identical, and matches the committed fixture.
Outcome serialization() {
  Outcome out;
  const fs::path dir = fs::temp_directory_path() / "convkit_acceptance_io";
  fs::create_directories(dir);
  const ModelGraph vgg = make_cifar_vgg({.seed = 9}, 4);
  const auto [dac, r1] = apply_plan(vgg, uniform_plan(vgg, Scheme::dac, {RankChoice::Mode::value, 2}, "all"));
  const auto [sp, r2] = apply_plan(vgg, uniform_plan(vgg, Scheme::spatial, {RankChoice::Mode::match_dac, 2}, "all"));
  const std::vector<std::pair<std::string, ModelGraph>> models = {
      {"fixture", fixture_model()}, {"vgg", vgg}, {"vgg_dac", dac}, {"vgg_spatial", sp}};
  for (const auto& [name, m] : models) {
    const fs::path a = dir / (name + "_a"), b = dir / (name + "_b");
    save_model(m, a.string() + ".json", a.string() + ".bin");
    const ModelGraph loaded = load_model(a.string() + ".json", a.string() + ".bin");
    save_model(loaded, b.string() + ".json", b.string() + ".bin");
    if (!(loaded == m) ||
        read_bytes(a.string() + ".json") != read_bytes(b.string() + ".json") ||
        read_bytes(a.string() + ".bin") != read_bytes(b.string() + ".bin")) {
      out.pass = false;
      out.detail += name + " round-trip differs; ";
    }
  }
  fs::remove_all(dir);

  const fs::path golden = fs::path(CONVKIT_FIXTURE_DIR) / "golden";
  const std::string gj = read_bytes(golden.string() + ".json");
  const std::string gb = read_bytes(golden.string() + ".bin");
  const ModelGraph fixture = fixture_model();
  const auto bytes = blob_bytes(fixture);
  if (gj.empty() || gj != manifest_text(fixture) ||
      gb != std::string(bytes.begin(), bytes.end())) {
    out.pass = false;
    out.detail += "generated fixture differs from committed golden files; ";
  } else {
    const ModelGraph loaded = load_model(golden.string() + ".json", golden.string() + ".bin");
    if (!(loaded == fixture)) {
      out.pass = false;
      out.detail += "golden files load to a different model; ";
    }
  }
  out.detail += fmt("%zu models round-tripped, golden fixture %zu + %zu bytes", models.size(),
                    gj.size(), gb.size());
  return out;
}

// 8. conv2d against the naive seven-loop oracle.
Outcome naive_conv() {
  Rng rng(8);
  Outcome out;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t kw = rng.uniform_int(1, 5), kh = rng.uniform_int(1, 5);
    const std::size_t c = rng.uniform_int(1, 32), n = rng.uniform_int(1, 32);
    ConvWeights w{testing::random_tensor({n, kw, kh, c}, rng)};
    if (rng.uniform_int(0, 1)) w.bias = testing::random_vector(n, rng);
    w.stride = {rng.uniform_int(1, 3), rng.uniform_int(1, 3)};
    w.padding = {rng.uniform_int(0, kw - 1), rng.uniform_int(0, kh - 1)};
    const FeatureMap f =
        testing::random_map(rng.uniform_int(kw, 20), rng.uniform_int(kh, 20), c, rng);
    MacCounter counter;
    const FeatureMap got = conv2d(f, w, counter);
    const FeatureMap want = testing::naive_conv2d(f, w);
    if (got.width() != want.width() || got.height() != want.height()) {
      out.pass = false;
      out.detail += fmt("case %d: extent mismatch; ", trial);
      continue;
    }
    const double rel = testing::relative_diff(want, got);
    worst = std::max(worst, rel);
    if (rel > kConvRelTol) {
      out.pass = false;
      out.detail += fmt("case %d: relative diff %.3g; ", trial, rel);
    }
  }
  out.detail += fmt("100 cases, worst relative diff %.3g", worst);
  return out;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args[0] == "--write-fixture") {
    const fs::path golden = fs::path(CONVKIT_FIXTURE_DIR) / "golden";
    save_model(fixture_model(), golden.string() + ".json", golden.string() + ".bin");
    std::printf("wrote %s.{json,bin}\n", golden.string().c_str());
    return 0;
  }
  std::set<int> only;
  for (const auto& a : args) only.insert(std::stoi(a));

  const std::vector<Criterion> criteria = {
      {1, "full-rank identity", full_rank_identity},
      {2, "optimality oracle", eckart_young},
      {3, "MAC ratio", mac_ratio},
      {4, "rank matching", rank_matching},
      {5, "monotonicity", monotonicity},
      {6, "scheme ordering", scheme_ordering},
      {7, "serialization", serialization},
      {8, "naive conv oracle", naive_conv},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
