// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any fails.
//
//   acceptance --work-dir DIR [--only 1,2,...]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "mpseg/gradcheck.hpp"
#include "mpseg/infer.hpp"
#include "mpseg/kernels.hpp"
#include "mpseg/mask.hpp"
#include "mpseg/matching.hpp"
#include "mpseg/metrics.hpp"
#include "mpseg/mp.hpp"
#include "mpseg/refine_study.hpp"
#include "mpseg/report.hpp"
#include "mpseg/rng.hpp"
#include "mpseg/train.hpp"

using namespace mpseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr double kHungarianTol = 1e-9;
constexpr double kHungarianSeconds = 10.0;
constexpr double kTrendRho = 0.6;           // Spearman ρ for "increasing"
constexpr double kFirstLayerMargin = 0.10;  // 10 points
constexpr double kTrendSeconds = 45.0 * 60.0;
constexpr double kApMargin = 3.0;           // AP-lite in percent: +0.03 absolute
constexpr std::size_t kRefineInstances = 1000;
constexpr double kWeightRatioRelTol = 1e-12;
constexpr double kChiSquareP = 0.01;
constexpr std::size_t kNoiseDraws = 10000;

const std::vector<std::string> kTrendVariants = {"baseline", "mp-first-layer", "mp-all-layers",
                                                 "mp-all+noises"};
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

bool g_all_pass = true;

void report(int id, bool pass, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
  g_all_pass = g_all_pass && pass;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc cli(const std::string& args) {
  const std::string cmd = std::string(MPSEG_CLI_PATH) + " " + args + " 2>&1";
  Proc r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> median_curve(const std::vector<std::vector<double>>& runs) {
  std::vector<double> out(runs.front().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<double> col;
    for (const auto& r : runs) col.push_back(r[i]);
    out[i] = median(col);
  }
  return out;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Spearman correlation of v against its index.
double spearman(const std::vector<double>& v) {
  std::vector<double> pos(v.size());
  std::iota(pos.begin(), pos.end(), 1.0);
  const auto a = ranks(v);
  const double n = static_cast<double>(v.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mp = std::accumulate(pos.begin(), pos.end(), 0.0) / n;
  double sab = 0, saa = 0, spp = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sab += (a[i] - ma) * (pos[i] - mp);
    saa += (a[i] - ma) * (a[i] - ma);
    spp += (pos[i] - mp) * (pos[i] - mp);
  }
  return saa == 0 ? 0.0 : sab / std::sqrt(saa * spp);
}

bool increasing(const std::vector<double>& v) {
  return spearman(v) >= kTrendRho && v.back() > v.front();
}

std::string curve(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(100.0 * v[i], 1);
  return s;
}

std::optional<std::vector<std::size_t>> layers_of(const std::string& variant) {
  if (variant == "mp-first-layer") return std::vector<std::size_t>{1};
  if (variant == "mp-first-3") return std::vector<std::size_t>{1, 2, 3};
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  const auto results = run_grad_suite(1);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string worst_name;
  bool ok = !results.empty();
  for (const auto& r : results) {
    if (!(r.rel_err < kGradTol)) ok = false;
    if (r.rel_err >= worst) {
      worst = r.rel_err;
      worst_name = r.name;
    }
  }
  report(1, ok && secs < kGradSeconds,
         std::to_string(results.size()) + " checks, worst rel_err " + num(worst, 10) + " (" + worst_name +
             "), " + num(secs, 1) + " s");
}

double brute_force(const std::vector<double>& c, std::size_t n, std::size_t m) {
  const std::size_t k = std::min(n, m);
  double best = INFINITY;
  std::vector<bool> used(m, false);
  auto rec = [&](auto&& self, std::size_t r, std::size_t taken, double acc) -> void {
    if (taken == k) {
      best = std::min(best, acc);
      return;
    }
    if (r == n || n - r < k - taken) return;
    for (std::size_t j = 0; j < m; ++j)
      if (!used[j]) {
        used[j] = true;
        self(self, r + 1, taken + 1, acc + c[r * m + j]);
        used[j] = false;
      }
    self(self, r + 1, taken, acc);
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

void criterion2() {
  const auto t0 = Clock::now();
  Rng rng(99);
  std::size_t bad = 0;
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 7));
    std::vector<double> c(n * m);
    for (auto& v : c) v = rng.uniform(-10.0, 10.0);
    const double d = std::abs(hungarian(c, n, m).cost - brute_force(c, n, m));
    worst = std::max(worst, d);
    bad += d > kHungarianTol;
  }
  const double secs = seconds_since(t0);
  report(2, bad == 0 && secs < kHungarianSeconds,
         "200 matrices, mismatches " + std::to_string(bad) + ", max |diff| " + num(worst, 12) + ", " +
             num(secs, 2) + " s");
}

// ---------------------------------------------------------------------------

struct TrainedRun {
  std::string variant;
  std::uint64_t seed = 0;
  fs::path dir;
  AnalysisResult holdout;
};

struct Benchmark {
  Dataset data;
  fs::path dataset_path;
  std::vector<TrainedRun> runs;
  double seconds = 0;
  bool cli_ok = true;
  std::string cli_error;
};

Benchmark run_benchmark(const fs::path& work) {
  Benchmark b;
  const auto t0 = Clock::now();
  const std::string config = std::string(MPSEG_CONFIG_DIR) + "/reference.json";
  const auto cfg = RunConfig::from_json(nlohmann::json::parse(slurp(config)));
  b.data = Dataset{cfg.synth, generate_scenes(cfg.synth)};
  b.dataset_path = work / "reference.ds";
  save_dataset(b.dataset_path, b.data);
  const Split split = split_dataset(b.data.scenes.size(), cfg.train.holdout_fraction);

  for (const auto& v : kTrendVariants)
    for (auto seed : kSeeds) {
      TrainedRun r;
      r.variant = v;
      r.seed = seed;
      r.dir = work / (v + "_seed" + std::to_string(seed));
      const auto t1 = Clock::now();
      const Proc p = cli("train --config " + config + " --variant " + v + " --seed " + std::to_string(seed) +
                         " --dataset " + b.dataset_path.string() + " --out " + r.dir.string());
      if (p.code != 0) {
        b.cli_ok = false;
        b.cli_error = v + " seed " + std::to_string(seed) + " exit " + std::to_string(p.code);
        continue;
      }
      const DecoderParams params = load_checkpoint(r.dir / "checkpoint.bin");
      r.holdout = analyze(params, b.data, split.holdout, cfg.loss, layers_of(v));
      std::cout << "  trained " << v << " seed " << seed << " in " << num(seconds_since(t1), 1)
                << " s, holdout AP-lite " << num(100.0 * r.holdout.matching.ap.mean(), 2) << std::endl;
      b.runs.push_back(std::move(r));
    }
  b.seconds = seconds_since(t0);
  return b;
}

std::vector<const TrainedRun*> runs_of(const Benchmark& b, const std::string& v) {
  std::vector<const TrainedRun*> out;
  for (const auto& r : b.runs)
    if (r.variant == v) out.push_back(&r);
  return out;
}

void criterion3(const Benchmark& b) {
  const std::size_t N = 20;
  std::size_t max_o = 0;
  for (const auto& s : b.data.scenes) max_o = std::max(max_o, s.instances.size());
  std::vector<std::size_t> all(b.data.scenes.size());
  std::iota(all.begin(), all.end(), 0);
  double final_min = 1.0, hard_min = 1.0;
  std::size_t checked = 0;
  for (const auto& r : b.runs) {
    if (r.seed != kSeeds.front()) continue;
    const DecoderParams params = load_checkpoint(r.dir / "checkpoint.bin");
    const AnalysisResult a = analyze(params, b.data, all, {}, layers_of(r.variant));
    final_min = std::min(final_min, a.matching.final_util_min);
    for (double u : a.mp_util_hard) hard_min = std::min(hard_min, u);
    ++checked;
  }
  report(3, b.cli_ok && checked == kTrendVariants.size() && max_o <= N && final_min == 1.0 && hard_min == 1.0,
         std::to_string(checked) + " checkpoints x " + std::to_string(all.size()) + " scenes (max O " +
             std::to_string(max_o) + " <= N " + std::to_string(N) + "): min final Util " +
             num(100.0 * final_min, 1) + ", min MP hard-assignment Util " + num(100.0 * hard_min, 1));
}

void criterion4(const Benchmark& b) {
  auto curves = [&](const std::string& v, auto pick) {
    std::vector<std::vector<double>> c;
    for (const auto* r : runs_of(b, v)) c.push_back(pick(r->holdout));
    return c.empty() ? std::vector<double>{} : median_curve(c);
  };
  const auto base_util_all = curves("baseline", [](const AnalysisResult& a) { return a.matching.util; });
  const auto base_miou = curves("baseline", [](const AnalysisResult& a) { return a.matching.miou_l; });
  const auto mp_util = curves("mp-all+noises", [](const AnalysisResult& a) { return a.mp_util_bipartite; });
  const auto mp_miou = curves("mp-all+noises", [](const AnalysisResult& a) { return a.mp_miou_l; });
  const auto all_miou = curves("mp-all-layers", [](const AnalysisResult& a) { return a.mp_miou_l; });
  const auto first_miou = curves("mp-first-layer", [](const AnalysisResult& a) { return a.mp_miou_l; });
  const auto all_match = curves("mp-all-layers", [](const AnalysisResult& a) { return a.matching.miou_l; });
  const auto first_match = curves("mp-first-layer", [](const AnalysisResult& a) { return a.matching.miou_l; });
  if (!b.cli_ok || base_util_all.empty() || mp_util.empty() || all_miou.empty() || first_miou.empty()) {
    report(4, false, "training failed: " + b.cli_error);
    return;
  }
  // Util entries cover layers 0..L; the trend is read over layers 1..L.
  const std::vector<double> base_util(base_util_all.begin() + 1, base_util_all.end());

  const bool a_ok = increasing(base_util) && increasing(base_miou);
  std::cout << "  (a) baseline Util^1..9   " << curve(base_util) << "  rho " << num(spearman(base_util), 3)
            << "\n      baseline mIoU-L^1..9 " << curve(base_miou) << "  rho " << num(spearman(base_miou), 3)
            << std::endl;

  const double du = mp_util[1] - base_util_all[1];
  const double dm = mp_miou[0] - base_miou[0];
  const bool b_ok = du >= kFirstLayerMargin && dm >= kFirstLayerMargin;
  std::cout << "  (b) Util^1 " << num(100 * base_util_all[1], 1) << " -> " << num(100 * mp_util[1], 1)
            << " (MP part, bipartite), mIoU-L^1 " << num(100 * base_miou[0], 1) << " -> "
            << num(100 * mp_miou[0], 1) << " (MP part)" << std::endl;

  auto mean49 = [](const std::vector<double>& v) {
    return std::accumulate(v.begin() + 3, v.end(), 0.0) / static_cast<double>(v.size() - 3);
  };
  const double m_all = mean49(all_miou), m_first = mean49(first_miou);
  const bool c_ok = m_all >= m_first;
  std::cout << "  (c) MP-part mean mIoU-L^4..9: mp-all-layers " << num(100 * m_all, 2) << " vs mp-first-layer "
            << num(100 * m_first, 2) << "; matching part (information only): " << num(100 * mean49(all_match), 2)
            << " vs " << num(100 * mean49(first_match), 2) << std::endl;

  const bool t_ok = b.seconds < kTrendSeconds;
  report(4, a_ok && b_ok && c_ok && t_ok,
         std::string("(a) ") + (a_ok ? "ok" : "not increasing") + ", (b) dUtil^1 " + num(100 * du, 1) +
             " dmIoU-L^1 " + num(100 * dm, 1) + (b_ok ? " ok" : " below 10") + ", (c) " +
             (c_ok ? "ok" : "mp-all-layers below mp-first-layer") + ", runtime " + num(b.seconds / 60.0, 1) +
             " min");
}

void criterion5(const Benchmark& b) {
  std::vector<double> base, mp;
  for (const auto* r : runs_of(b, "baseline")) base.push_back(100.0 * r->holdout.matching.ap.mean());
  for (const auto* r : runs_of(b, "mp-all+noises")) mp.push_back(100.0 * r->holdout.matching.ap.mean());
  if (base.size() != kSeeds.size() || mp.size() != kSeeds.size()) {
    report(5, false, "training failed: " + b.cli_error);
    return;
  }
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : ",") + num(x, 2);
    return s;
  };
  const double mb = median(base), mm = median(mp);
  report(5, mm >= mb + kApMargin,
         "holdout AP-lite median baseline " + num(mb, 2) + " [" + list(base) + "], mp-all+noises " + num(mm, 2) +
             " [" + list(mp) + "], difference " + num(mm - mb, 2) + " points (need >= +" + num(kApMargin, 1) + ")");
}

void criterion6(const Benchmark& b) {
  bool ok = b.cli_ok && !b.runs.empty();
  std::size_t compared = 0;
  for (const auto& r : b.runs) {
    if (r.seed != kSeeds.front()) continue;
    const std::string ck = (r.dir / "checkpoint.bin").string();
    const fs::path d = r.dir.parent_path() / (r.dir.filename().string() + "_eval_dec");
    const fs::path p = r.dir.parent_path() / (r.dir.filename().string() + "_eval_plain");
    const Proc a = cli("eval --checkpoint " + ck + " --dataset " + b.dataset_path.string() + " --out " + d.string());
    const Proc c = cli("eval --plain-forward --checkpoint " + ck + " --dataset " + b.dataset_path.string() +
                       " --out " + p.string());
    ok = ok && a.code == 0 && c.code == 0 && a.out == c.out &&
         slurp(d / "metrics.txt") == slurp(p / "metrics.txt") && slurp(d / "layers.csv") == slurp(p / "layers.csv");
    ++compared;
  }
  // Raw outputs as well, for every scene.
  std::size_t scenes = 0;
  if (!b.runs.empty()) {
    const DecoderParams params = load_checkpoint(b.runs.back().dir / "checkpoint.bin");
    const auto protos = make_prototypes(b.data.config);
    for (const auto& s : b.data.scenes) {
      const FeaturePyramid pyr = synth_features(s, b.data.config, protos);
      const auto x = full_forward(matching_only_spec(pyr, params), params);
      const auto y = inference_forward(pyr, params);
      for (std::size_t l = 0; l < x.layers.size(); ++l) {
        const auto xm = x.layers[l].mask_logits.values(), ym = y.layers[l].mask_logits.values();
        const auto xc = x.layers[l].class_logits.values(), yc = y.layers[l].class_logits.values();
        ok = ok && std::equal(xm.begin(), xm.end(), ym.begin(), ym.end()) &&
             std::equal(xc.begin(), xc.end(), yc.begin(), yc.end());
      }
      ++scenes;
    }
  }
  report(6, ok, std::to_string(compared) + " checkpoints: eval reports byte-identical with and without MP path; " +
                    std::to_string(scenes) + " scenes bitwise-equal raw outputs");
}

void criterion7(const Benchmark& b) {
  const TrainedRun* run = nullptr;
  for (const auto& r : b.runs)
    if (r.variant == "mp-all+noises") run = &r;
  DecoderParams params;
  if (run) {
    params = load_checkpoint(run->dir / "checkpoint.bin");
  } else {
    DecoderDims dims;
    params = DecoderParams::init(dims, 1);
  }
  const auto protos = make_prototypes(b.data.config);
  Rng rng(4242);
  std::size_t trials = 0, mismatches = 0;
  for (std::size_t si = 0; si < 40; ++si) {
    const Scene& s = b.data.scenes[si * 5 % b.data.scenes.size()];
    const FeaturePyramid pyr = synth_features(s, b.data.config, protos);
    const auto plain = full_forward(matching_only_spec(pyr, params), params);
    for (int rep = 0; rep < 3; ++rep) {
      // Arbitrary MP part: random group layout, random query vectors and random grids.
      const std::size_t groups = 1 + rng.below(4), gsize = 1 + rng.below(6), M = groups * gsize;
      std::vector<double> q(M * params.dims.dim);
      for (auto& v : q) v = rng.normal() * (rep == 2 ? 1e3 : 5.0);
      ForwardSpec spec;
      spec.pyramid = &pyr;
      const Tensor parts[] = {params.query_embed, Tensor::from({M, params.dims.dim}, q)};
      spec.queries = concat_rows(parts);
      spec.num_matching = params.dims.num_queries;
      spec.self_block = build_self_block(spec.num_matching, std::vector<std::size_t>(groups, gsize));
      for (std::size_t layer = 1; layer <= params.dims.num_layers; ++layer) {
        if (rng.uniform01() < 0.3) continue;
        const auto& g = pyr.scales[scale_for_layer(layer)];
        LayerOverride ov;
        ov.layer = layer;
        ov.first_query = spec.num_matching;
        for (std::size_t k = 0; k < M; ++k) {
          BoolGrid grid(g.height, g.width);
          for (auto& bit : grid.bits) bit = rng.uniform01() < 0.5 ? 1 : 0;
          ov.grids.push_back(std::move(grid));
        }
        spec.overrides.push_back(std::move(ov));
      }
      const auto with_mp = full_forward(spec, params);
      const std::size_t N = params.dims.num_queries, P = plain.height * plain.width;
      for (std::size_t l = 0; l < plain.layers.size(); ++l) {
        const auto a = plain.layers[l].mask_logits.values(), c = with_mp.layers[l].mask_logits.values();
        const auto ac = plain.layers[l].class_logits.values(), cc = with_mp.layers[l].class_logits.values();
        const std::size_t C = plain.layers[l].class_logits.cols();
        if (!std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(N * P), c.begin()) ||
            !std::equal(ac.begin(), ac.begin() + static_cast<std::ptrdiff_t>(N * C), cc.begin()))
          ++mismatches;
      }
      ++trials;
    }
  }
  report(7, mismatches == 0,
         std::to_string(trials) + " random MP parts on " + (run ? "the trained mp-all+noises checkpoint" : "a fresh init") +
             ", mismatching layer outputs " + std::to_string(mismatches));
}

void criterion8() {
  RefineStudyConfig cfg;
  cfg.samples_per_sigma = (kRefineInstances + cfg.sigmas.size() - 1) / cfg.sigmas.size();
  const auto samples = run_refine_study(cfg);
  std::size_t premise = 0, counter = 0;
  for (const auto& s : samples) {
    const bool p = s.bounds.condition && s.bounds.T0 > s.bounds.t1;
    premise += p;
    counter += p && !s.bounds.separable;
  }
  // Constant weights: softmax of a constant score row over M₀.
  Rng rng(8);
  std::size_t ratio_checks = 0;
  double worst = 0;
  for (std::size_t t = 0; t < kRefineInstances; ++t) {
    const auto a = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, 64));
    std::vector<double> scores(a + c, rng.normal());
    double z = 0;
    for (double s : scores) z += std::exp(s - scores[0]);
    std::vector<double> w(scores.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(scores[i] - scores[0]) / z;
    const WeightRatio r = unbiased_weight_ratio(std::span(w).subspan(0, a), std::span(w).subspan(a));
    worst = std::max(worst, std::abs(r.weight_ratio - r.area_ratio) / std::max(r.area_ratio, 1e-300));
    ++ratio_checks;
  }
  report(8, samples.size() >= kRefineInstances && counter == 0 && worst <= kWeightRatioRelTol,
         std::to_string(samples.size()) + " instances, premise held " + std::to_string(premise) +
             ", counterexamples " + std::to_string(counter) + "; constant-weight ratio vs area ratio over " +
             std::to_string(ratio_checks) + " rows, max rel diff " + num(worst, 17));
}

void criterion9(const Dataset& data) {
  // Flip counts are the Hamming distance between input and output.
  BinaryMask m(16, 16);
  for (std::size_t y = 3; y < 8; ++y)
    for (std::size_t x = 3; x < 13; ++x) m.set(y, x, true);
  const double lambda = 0.2;
  const auto kmax = static_cast<std::size_t>(std::floor(lambda * static_cast<double>(m.area())));
  std::vector<double> hist(kmax + 1, 0.0);
  bool in_range = true;
  for (std::uint64_t s = 0; s < kNoiseDraws; ++s) {
    const BinaryMask o = point_noise(m, lambda, s);
    std::size_t d = 0;
    for (std::size_t i = 0; i < m.pixels(); ++i) d += m[i] != o[i];
    if (d > kmax) {
      in_range = false;
      continue;
    }
    hist[d] += 1;
  }
  const double e = static_cast<double>(kNoiseDraws) / static_cast<double>(kmax + 1);
  double chi2 = 0;
  for (double h : hist) chi2 += (h - e) * (h - e) / e;
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(kmax)), chi2));

  // Shift noise on the reference instances.
  std::size_t shifts = 0, outside = 0;
  for (std::size_t t = 0; t < kNoiseDraws; ++t) {
    const Scene& s = data.scenes[t % data.scenes.size()];
    const BinaryMask& gt = s.instances[t % s.instances.size()].mask;
    const BBox bb = bounding_box(gt);
    const BinaryMask o = shift_noise(gt, t);
    if (o.empty()) continue;
    const Centroid c = centroid(o);
    const bool inside = c.y + 0.5 > static_cast<double>(bb.y0) && c.y + 0.5 < static_cast<double>(bb.y1 + 1) &&
                        c.x + 0.5 > static_cast<double>(bb.x0) && c.x + 0.5 < static_cast<double>(bb.x1 + 1);
    outside += !inside;
    ++shifts;
  }

  // λ_p = 0 and λ_l = 0 reproduce the GT inputs.
  DecoderDims dims;
  dims.num_categories = data.config.num_categories;
  dims.dim = data.config.feature_dim;
  const DecoderParams params = DecoderParams::init(dims, 1);
  MPConfig cfg;
  cfg.enabled = true;
  cfg.lambda_p = 0.0;
  cfg.lambda_l = 0.0;
  const auto protos = make_prototypes(data.config);
  std::size_t exact_scenes = 0, inexact = 0;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    const Scene& s = data.scenes[i];
    const FeaturePyramid pyr = synth_features(s, data.config, protos);
    const MPPart part = build_mp_part(s, pyr, params, cfg, i);
    bool same = part.query_category == part.true_category;
    for (const auto& ov : part.overrides) {
      const auto& g = pyr.scales[scale_for_layer(ov.layer)];
      for (std::size_t q = 0; q < part.size(); ++q)
        same = same && ov.grids[q] == to_attention_block(resize_nearest(s.instances[part.gt_index[q]].mask,
                                                                          g.height, g.width));
    }
    for (const auto& inst : s.instances) same = same && point_noise(inst.mask, 0.0, i) == inst.mask;
    (same ? exact_scenes : inexact) += 1;
  }
  report(9, in_range && p > kChiSquareP && outside == 0 && inexact == 0,
         "flip counts on [0," + std::to_string(kmax) + "] chi2 " + num(chi2, 2) + " p " + num(p, 4) +
             "; shift centroids outside bbox " + std::to_string(outside) + "/" + std::to_string(shifts) +
             "; zero-noise MP inputs exact on " + std::to_string(exact_scenes) + "/" +
             std::to_string(data.scenes.size()) + " scenes");
}

void criterion10(const Benchmark& b) {
  if (b.runs.empty()) {
    report(10, false, "no trained run to repeat");
    return;
  }
  const TrainedRun& first = b.runs.front();
  const std::string config = std::string(MPSEG_CONFIG_DIR) + "/reference.json";
  const Proc t = cli("train --config " + config + " --variant " + first.variant + " --seed " +
                     std::to_string(first.seed) + " --dataset " + b.dataset_path.string() + " --out " +
                     first.dir.string() + "_repeat");
  bool ok = t.code == 0;
  std::size_t files = 0;
  for (const char* f : {"train_log.csv", "checkpoint.bin", "metrics.txt", "layers.csv"}) {
    ok = ok && slurp(first.dir / f) == slurp(first.dir.string() + "_repeat/" + f);
    ++files;
  }
  const std::string ck = (first.dir / "checkpoint.bin").string();
  const Proc e1 = cli("eval --checkpoint " + ck + " --dataset " + b.dataset_path.string() + " --split holdout");
  const Proc e2 = cli("eval --checkpoint " + ck + " --dataset " + b.dataset_path.string() + " --split holdout");
  ok = ok && e1.code == 0 && e1.out == e2.out;
  report(10, ok, "train repeated (" + first.variant + " seed " + std::to_string(first.seed) + "): " +
                     std::to_string(files) + " output files byte-identical; eval stdout identical across 2 runs");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "mpseg_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::istringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  auto want = [&](int c) { return only.empty() || only.count(c) > 0; };
  fs::create_directories(work);
  setenv("MPSEG_THREADS", "1", 1);
  kernels::set_max_threads(1);

  try {
    if (want(1)) criterion1();
    if (want(2)) criterion2();
    const bool need_bench = want(3) || want(4) || want(5) || want(6) || want(7) || want(10);
    Benchmark bench;
    if (need_bench) {
      bench = run_benchmark(work);
    } else {
      const auto cfg = RunConfig::from_json(nlohmann::json::parse(slurp(std::string(MPSEG_CONFIG_DIR) + "/reference.json")));
      bench.data = Dataset{cfg.synth, generate_scenes(cfg.synth)};
    }
    if (want(3)) criterion3(bench);
    if (want(4)) criterion4(bench);
    if (want(5)) criterion5(bench);
    if (want(6)) criterion6(bench);
    if (want(7)) criterion7(bench);
    if (want(8)) criterion8();
    if (want(9)) criterion9(bench.data);
    if (want(10)) criterion10(bench);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (g_all_pass ? "acceptance: all criteria passed" : "acceptance: some criteria FAILED") << std::endl;
  return g_all_pass ? 0 : 1;
}
