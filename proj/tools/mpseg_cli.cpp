// mpseg: dataset generation, training, evaluation and analysis commands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpseg/decoder.hpp"
#include "mpseg/error.hpp"
#include "mpseg/gradcheck.hpp"
#include "mpseg/kernels.hpp"
#include "mpseg/refine_study.hpp"
#include "mpseg/report.hpp"
#include "mpseg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mpseg;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

json read_json(const fs::path& p) {
  const std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

std::vector<std::size_t> select_scenes(const Dataset& ds, const std::string& split, double fraction) {
  if (split == "all") {
    std::vector<std::size_t> all(ds.scenes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  if (split == "holdout") return split_dataset(ds.scenes.size(), fraction).holdout;
  throw ConfigError("--split must be 'all' or 'holdout'");
}

std::string dataset_hash(const Dataset& ds) { return hex64(fnv1a64(serialize_dataset(ds))); }

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_gen_data(const GenDataArgs& a) {
  const json j = read_json(a.config);
  SynthConfig cfg = SynthConfig::from_json(j.contains("synth") ? j.at("synth") : j);
  if (a.seed) cfg.seed = *a.seed;
  const Dataset ds{cfg, generate_scenes(cfg)};
  const std::string bytes = serialize_dataset(ds);
  write_text(a.out, bytes);
  std::cout << "scenes: " << ds.scenes.size() << '\n' << "hash: " << hex64(fnv1a64(bytes)) << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, variant, out, dataset;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  json j = read_json(a.config);
  if (a.seed) j["seed"] = *a.seed;
  if (!a.out.empty()) j["out"] = a.out;
  if (!a.dataset.empty()) j["dataset"] = a.dataset;
  const RunConfig cfg =
      RunConfig::from_json(j, a.variant.empty() ? std::nullopt : std::optional<std::string>(a.variant));
  const Dataset data = resolve_dataset(cfg);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  write_text(out / "config.json", cfg.to_json().dump(2) + "\n");

  std::ostringstream log;
  log << "step,loss\n";
  const TrainResult tr = train(cfg, data, [&](std::size_t step, double loss) {
    std::cout << "step " << step << " loss " << fixed6(loss) << '\n' << std::flush;
    log << step << ',' << fixed6(loss) << '\n';
  });
  write_text(out / "train_log.csv", log.str());
  save_checkpoint(out / "checkpoint.bin", tr.params);

  const Split split = split_dataset(data.scenes.size(), cfg.train.holdout_fraction);
  const auto& eval_idx = split.holdout.empty() ? split.train : split.holdout;
  MetricsReport r;
  r.command = "train";
  r.variant = to_string(cfg.variant);
  r.seed = cfg.seed;
  r.config_hash = hex64(cfg.hash());
  r.dataset_hash = dataset_hash(data);
  r.split = split.holdout.empty() ? "train" : "holdout";
  r.eval = evaluate(tr.params, data, eval_idx, EvalPath::kDecoder, cfg.loss);
  r.epoch_loss = tr.log.epoch_loss;
  const std::string report = render_report(r);
  write_text(out / "metrics.txt", report);
  write_text(out / "layers.csv", render_layer_csv(r.eval));
  std::cout << report;
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, out, split = "all";
  double holdout_fraction = 0.2;
  bool plain = false;
};

int cmd_eval(const EvalArgs& a) {
  const DecoderParams params = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.dataset);
  if (data.scenes.empty()) throw CompatibilityError("dataset holds no scenes");
  const auto idx = select_scenes(data, a.split, a.holdout_fraction);
  MetricsReport r;
  r.command = "eval";
  r.variant = "-";
  r.config_hash = hex64(fnv1a64(serialize_checkpoint(params)));
  r.dataset_hash = dataset_hash(data);
  r.split = a.split;
  r.eval = evaluate(params, data, idx, a.plain ? EvalPath::kPlain : EvalPath::kDecoder);
  const std::string report = render_report(r);
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "metrics.txt", report);
    write_text(fs::path(a.out) / "layers.csv", render_layer_csv(r.eval));
  }
  std::cout << report;
  return 0;
}

struct AnalyzeArgs {
  std::string checkpoint, dataset, out, split = "all", mp_layers = "all";
  double holdout_fraction = 0.2;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const DecoderParams params = load_checkpoint(a.checkpoint);
  const Dataset data = load_dataset(a.dataset);
  if (data.scenes.empty()) throw CompatibilityError("dataset holds no scenes");
  std::optional<std::vector<std::size_t>> layers;
  if (a.mp_layers != "all") {
    layers.emplace();
    std::istringstream ss(a.mp_layers);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        layers->push_back(v);
      } catch (const std::logic_error&) {
        throw ConfigError("--mp-layers: expected 'all' or a comma list of layer indices");
      }
    }
  }
  const AnalysisResult res =
      analyze(params, data, select_scenes(data, a.split, a.holdout_fraction), {}, layers);
  const std::string table = render_analysis_table(res);
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "analysis.txt", table);
    write_text(fs::path(a.out) / "analysis.csv", render_analysis_csv(res));
  }
  std::cout << table;
  return 0;
}

int cmd_grad_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : run_grad_suite(seed)) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " rel_err=" << r.rel_err
              << " entries=" << r.entries << '\n';
    ok = ok && r.pass;
  }
  std::cout << (ok ? "grad-check: all passed\n" : "grad-check: FAILED\n");
  return ok ? 0 : static_cast<int>(ExitCode::kCheckFailure);
}

struct RefineArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_refine_study(const RefineArgs& a) {
  RefineStudyConfig cfg = a.config.empty() ? RefineStudyConfig{} : RefineStudyConfig::from_json(read_json(a.config));
  if (a.seed) cfg.seed = *a.seed;
  const auto samples = run_refine_study(cfg);
  std::string csv = refinement_csv_header();
  for (const auto& s : samples) csv += refinement_csv_row(s.index, s.sigma, s.bounds);
  write_text(a.out.empty() ? "refine_study.csv" : a.out, csv);
  std::size_t counter = 0;
  for (double sigma : cfg.sigmas) {
    std::size_t n = 0, cond = 0, sep = 0, implied = 0;
    for (const auto& s : samples) {
      if (s.sigma != sigma) continue;
      ++n;
      const bool premise = s.bounds.condition && s.bounds.T0 > s.bounds.t1;
      cond += premise ? 1 : 0;
      sep += s.bounds.separable ? 1 : 0;
      implied += (premise && s.bounds.separable) ? 1 : 0;
      counter += (premise && !s.bounds.separable) ? 1 : 0;
    }
    std::cout << "sigma " << fixed6(sigma) << " samples " << n << " condition " << cond << " separable "
              << sep << " condition_and_separable " << implied << '\n';
  }
  std::cout << "counterexamples: " << counter << '\n';
  return counter == 0 ? 0 : static_cast<int>(ExitCode::kCheckFailure);
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("MPSEG_THREADS")) kernels::set_max_threads(std::atoi(t));

  CLI::App app{"Mask-piloted training of a masked-attention segmentation decoder"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  g->add_option("--config", gen.config, "Synthetic data config (JSON)")->required();
  g->add_option("--out", gen.out, "Dataset file")->required();
  g->add_option("--seed", gen.seed, "Override the config seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a decoder variant");
  t->add_option("--config", tr.config, "Run config (JSON)")->required();
  t->add_option("--variant", tr.variant, "Training variant");
  t->add_option("--seed", tr.seed, "Override the config seed");
  t->add_option("--out", tr.out, "Output directory");
  t->add_option("--dataset", tr.dataset, "Dataset file (default: generate from the config)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with MP disabled");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--dataset", ev.dataset, "Dataset file")->required();
  e->add_option("--split", ev.split, "all | holdout");
  e->add_option("--holdout-fraction", ev.holdout_fraction, "Held-out share for --split holdout");
  e->add_option("--out", ev.out, "Directory for metrics.txt and layers.csv");
  e->add_flag("--plain-forward", ev.plain, "Use the forward pass without MP machinery");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Layer-wise mIoU-L / Util table");
  a->add_option("--checkpoint", an.checkpoint, "Checkpoint file")->required();
  a->add_option("--dataset", an.dataset, "Dataset file")->required();
  a->add_option("--split", an.split, "all | holdout");
  a->add_option("--holdout-fraction", an.holdout_fraction, "Held-out share for --split holdout");
  a->add_option("--out", an.out, "Directory for analysis.txt and analysis.csv");
  a->add_option("--mp-layers", an.mp_layers, "Layers fed GT masks in the MP part: all | 1,2,3");

  std::uint64_t gc_seed = 1;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  gc->add_option("--seed", gc_seed, "Suite seed");

  RefineArgs rs;
  auto* r = app.add_subcommand("refine-study", "Sample refinement-threshold instances");
  r->add_option("--config", rs.config, "Study config (JSON)");
  r->add_option("--out", rs.out, "CSV output file");
  r->add_option("--seed", rs.seed, "Override the study seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*g) return cmd_gen_data(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*a) return cmd_analyze(an);
    if (*gc) return cmd_grad_check(gc_seed);
    if (*r) return cmd_refine_study(rs);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(err.code());
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(ExitCode::kCheckFailure);
  }
  return 0;
}
