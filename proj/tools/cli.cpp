#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "convkit/decompose.hpp"
#include "convkit/model.hpp"
#include "convkit/plan.hpp"
#include "convkit/sweep.hpp"
#include "convkit/synthetic.hpp"
#include "convkit/verify.hpp"
#include "json.hpp"

namespace convkit::cli {
namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_usage("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_usage("cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail_usage("write to '" + path.string() + "' failed");
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) fail_usage("no such file '" + path.string() + "'");
}

ModelGraph load(const std::string& manifest, const std::string& blob) {
  const fs::path m(manifest);
  const fs::path b = blob.empty() ? default_blob_path(m) : fs::path(blob);
  require_file(m);
  require_file(b);
  return load_model(m, b);
}

struct DecomposeArgs {
  std::string model, blob, out, out_blob, report, plan;
  std::string scheme = "dac";
  std::string rank;
  std::size_t match_dac_rank = 0;
  std::string layers = "all";
  std::vector<std::string> skip;
};

int cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
  const ModelGraph model = load(a.model, a.blob);

  DecompositionPlan plan;
  if (!a.plan.empty()) {
    if (!a.rank.empty() || a.match_dac_rank) {
      fail_usage("--plan cannot be combined with --rank or --match-dac-rank");
    }
    require_file(a.plan);
    plan = parse_plan(read_text(a.plan));
    plan.skip.insert(plan.skip.end(), a.skip.begin(), a.skip.end());
  } else {
    const Scheme scheme = parse_scheme(a.scheme);
    RankChoice rank;
    if (a.match_dac_rank) {
      if (!a.rank.empty()) fail_usage("--rank and --match-dac-rank are exclusive");
      rank = {RankChoice::Mode::match_dac, a.match_dac_rank};
    } else {
      if (a.rank.empty()) fail_usage("one of --plan, --rank or --match-dac-rank is required");
      rank = parse_rank_choice(a.rank);
    }
    plan = uniform_plan(model, scheme, rank, a.layers, a.skip);
  }

  const auto [decomposed, report] = apply_plan(model, plan);
  const fs::path out_manifest(a.out);
  save_model(decomposed, out_manifest,
             a.out_blob.empty() ? default_blob_path(out_manifest) : fs::path(a.out_blob));
  const std::string text = report_json(report);
  if (a.report.empty()) {
    out << text;
  } else {
    write_text(a.report, text);
  }
  return 0;
}

int cmd_flops(const std::string& manifest, bool as_json, std::ostream& out) {
  require_file(manifest);
  const ModelGraph model = load_manifest(manifest);
  const auto traces = model.trace();
  std::uint64_t total = 0;
  for (const auto& t : traces) total += t.macs;

  if (as_json) {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const auto& t : traces) {
      j["layers"].push_back({{"name", t.name},
                             {"kind", std::string(to_string(t.kind))},
                             {"output", {t.output.w, t.output.h, t.output.c}},
                             {"macs", t.macs}});
    }
    j["total_macs"] = total;
    out << j.dump(2) << "\n";
    return 0;
  }

  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %-10s %-16s %16s\n", "layer", "kind",
                "output", "macs");
  out << line;
  for (const auto& t : traces) {
    const std::string shape = std::to_string(t.output.w) + "x" +
                              std::to_string(t.output.h) + "x" +
                              std::to_string(t.output.c);
    std::snprintf(line, sizeof(line), "%-28s %-10s %-16s %16llu\n", t.name.c_str(),
                  std::string(to_string(t.kind)).c_str(), shape.c_str(),
                  static_cast<unsigned long long>(t.macs));
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-56s %16llu\n", "total",
                static_cast<unsigned long long>(total));
  out << line;
  return 0;
}

std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos) {
        const std::size_t lo = std::stoul(item.substr(0, dash));
        const std::size_t hi = std::stoul(item.substr(dash + 1));
        if (lo > hi) fail_usage(std::string("empty range in ") + what);
        for (std::size_t v = lo; v <= hi; ++v) values.push_back(v);
      } else {
        values.push_back(std::stoul(item));
      }
    } catch (const std::logic_error&) {
      fail_usage(std::string("invalid ") + what + " list '" + text + "'");
    }
  }
  return values;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"data-free factorization of convolutional layers", "convkit"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand(
      "decompose", "Replace conv2d layers by two-layer factorizations");
  decompose->add_option("model", dec.model, "Input manifest (.json)")->required();
  decompose->add_option("--blob", dec.blob, "Input blob (default: manifest with .bin)");
  decompose->add_option("-o,--out", dec.out, "Output manifest")->required();
  decompose->add_option("--out-blob", dec.out_blob, "Output blob (default: .bin next to --out)");
  decompose->add_option("--report", dec.report, "Write the JSON report here instead of stdout");
  decompose->add_option("--plan", dec.plan, "JSON decomposition plan");
  decompose->add_option("--scheme", dec.scheme, "dac, channel or spatial")
      ->capture_default_str();
  decompose->add_option("--rank", dec.rank,
                        "Rank (DAC) or filter count (channel/spatial), or 'full'");
  decompose->add_option("--match-dac-rank", dec.match_dac_rank,
                        "Channel/spatial filter count matching the MACs of this DAC rank");
  decompose->add_option("--layers", dec.layers,
                        "all, all-but-first, first:K or last:K")
      ->capture_default_str();
  decompose->add_option("--skip", dec.skip, "Layers to leave untouched");

  std::string flops_model;
  bool flops_json = false;
  auto* flops = app.add_subcommand("flops", "Per-layer MAC counts from the manifest alone");
  flops->add_option("model", flops_model, "Manifest (.json)")->required();
  flops->add_flag("--json", flops_json, "Emit JSON instead of a table");

  std::string verify_a, verify_b, verify_a_blob, verify_b_blob;
  std::size_t verify_inputs = 100;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Compare two models on random inputs");
  verify->add_option("model_a", verify_a, "Reference manifest")->required();
  verify->add_option("model_b", verify_b, "Candidate manifest")->required();
  verify->add_option("--blob-a", verify_a_blob, "Blob for model_a (default: .bin next to it)");
  verify->add_option("--blob-b", verify_b_blob, "Blob for model_b (default: .bin next to it)");
  verify->add_option("-n,--inputs", verify_inputs, "Number of random inputs")
      ->capture_default_str();
  verify->add_option("--seed", verify_seed, "Input generator seed")->capture_default_str();

  std::string sweep_model, sweep_blob, sweep_out, sweep_scheme = "dac",
      sweep_ranks = "1-5", sweep_direction = "single", sweep_counts;
  std::vector<std::string> sweep_layers;
  SweepConfig sweep_cfg;
  auto* sweep = app.add_subcommand("sweep", "Rank / layer-count ablation sweep");
  sweep->add_option("model", sweep_model, "Manifest (.json)")->required();
  sweep->add_option("--blob", sweep_blob, "Input blob (default: manifest with .bin)");
  sweep->add_option("-o,--out", sweep_out, "CSV output (default: stdout)");
  sweep->add_option("--scheme", sweep_scheme, "dac, channel or spatial")->capture_default_str();
  sweep->add_option("--ranks", sweep_ranks, "DAC ranks, e.g. 1-5 or 1,3,5")
      ->capture_default_str();
  sweep->add_option("--direction", sweep_direction,
                    "single, front-to-back or back-to-front")
      ->capture_default_str();
  sweep->add_option("--layer", sweep_layers, "Layer(s) for single-layer sweeps");
  sweep->add_option("--counts", sweep_counts, "Layer counts for multi-layer sweeps, e.g. 2-13");
  sweep->add_option("-n,--inputs", sweep_cfg.inputs, "Random inputs per row")->capture_default_str();
  sweep->add_option("--seed", sweep_cfg.seed, "Input generator seed")->capture_default_str();

  std::string synth_out;
  SyntheticOptions synth_opts;
  std::size_t synth_divisor = 1;
  bool synth_no_bias = false;
  auto* synth = app.add_subcommand("synth", "Write a CIFAR-VGG-shaped model with random weights");
  synth->add_option("-o,--out", synth_out, "Output manifest")->required();
  synth->add_option("--seed", synth_opts.seed, "Weight generator seed")->capture_default_str();
  synth->add_option("--spatial-decay", synth_opts.spatial_decay,
                    "Kernel spectrum decay per spatial frequency (1 = i.i.d.)")
      ->capture_default_str();
  synth->add_option("--width-divisor", synth_divisor, "Divide every layer width by this")->capture_default_str();
  synth->add_flag("--no-bias", synth_no_bias, "Omit bias tensors");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*decompose) return cmd_decompose(dec, out);
    if (*flops) return cmd_flops(flops_model, flops_json, out);
    if (*verify) {
      const ModelGraph a = load(verify_a, verify_a_blob);
      const ModelGraph b = load(verify_b, verify_b_blob);
      out << divergence_json(verify_models(a, b, verify_inputs, verify_seed));
      return 0;
    }
    if (*sweep) {
      sweep_cfg.scheme = parse_scheme(sweep_scheme);
      sweep_cfg.ranks = parse_list(sweep_ranks, "rank");
      sweep_cfg.direction = parse_direction(sweep_direction);
      sweep_cfg.layers = sweep_layers;
      if (!sweep_counts.empty()) sweep_cfg.layer_counts = parse_list(sweep_counts, "count");
      const ModelGraph model = load(sweep_model, sweep_blob);
      const std::string csv = sweep_csv(run_sweep(model, sweep_cfg));
      if (sweep_out.empty()) {
        out << csv;
      } else {
        write_text(sweep_out, csv);
      }
      return 0;
    }
    if (*synth) {
      synth_opts.bias = !synth_no_bias;
      const fs::path m(synth_out);
      save_model(make_cifar_vgg(synth_opts, synth_divisor), m, default_blob_path(m));
      return 0;
    }
  } catch (const Error& e) {
    err << "convkit: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "convkit: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  } catch (const std::exception& e) {
    err << "convkit: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::numeric);
  }
  return static_cast<int>(ErrorKind::usage);
}

}  // namespace convkit::cli
