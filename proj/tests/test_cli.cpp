#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(MPSEG_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path work_dir() {
  const fs::path d = fs::temp_directory_path() / "mpseg_test_cli";
  fs::create_directories(d);
  return d;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = work_dir() / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kTinySynth =
    R"({"num_scenes": 10, "num_categories": 3, "height": 16, "width": 16, "feature_dim": 8,
        "max_instances": 3, "rect_max": 8, "disk_max": 4, "seed": 5})";

std::string tiny_run_config(const fs::path& out) {
  return std::string(R"({"synth": )") + kTinySynth +
         R"(, "decoder": {"num_queries": 4, "num_layers": 3, "dim": 8, "ffn_dim": 16},
             "train": {"steps": 3, "log_every": 1}, "seed": 2, "out": ")" +
         out.string() + "\"}";
}

}  // namespace

TEST(Cli, MissingSubcommandIsConfigError) { EXPECT_EQ(run("").code, 2); }

TEST(Cli, ZeroCategoriesIsConfigError) {
  const auto cfg = write("k0.json", R"({"num_categories": 0})");
  EXPECT_EQ(run("gen-data --config " + cfg.string() + " --out " + (work_dir() / "k0.ds").string()).code, 2);
}

TEST(Cli, MissingConfigFileIsIoError) {
  EXPECT_EQ(run("gen-data --config " + (work_dir() / "absent.json").string() + " --out x.ds").code, 3);
}

TEST(Cli, MalformedJsonIsConfigError) {
  const auto cfg = write("bad.json", "{\"num_scenes\": ");
  EXPECT_EQ(run("gen-data --config " + cfg.string() + " --out " + (work_dir() / "bad.ds").string()).code, 2);
}

TEST(Cli, GenDataHashIsDeterministic) {
  const auto cfg = write("tiny.json", kTinySynth);
  const auto a = run("gen-data --config " + cfg.string() + " --out " + (work_dir() / "a.ds").string());
  const auto b = run("gen-data --config " + cfg.string() + " --out " + (work_dir() / "b.ds").string());
  const auto c = run("gen-data --config " + cfg.string() + " --seed 6 --out " + (work_dir() / "c.ds").string());
  ASSERT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("hash: "), std::string::npos);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(slurp(work_dir() / "a.ds"), slurp(work_dir() / "b.ds"));
}

TEST(Cli, EmptyDatasetIsCompatibilityError) {
  const auto cfg = write("empty.json", R"({"num_scenes": 0})");
  const auto ds = work_dir() / "empty.ds";
  ASSERT_EQ(run("gen-data --config " + cfg.string() + " --out " + ds.string()).code, 0);
  const auto rc = write("empty_run.json", tiny_run_config(work_dir() / "empty_run"));
  ASSERT_EQ(run("train --config " + rc.string()).code, 0);
  const auto ckpt = (work_dir() / "empty_run" / "checkpoint.bin").string();
  EXPECT_EQ(run("eval --checkpoint " + ckpt + " --dataset " + ds.string()).code, 5);
}

TEST(Cli, TrainEvalRoundTrip) {
  const fs::path out = work_dir() / "run";
  fs::remove_all(out);
  const auto rc = write("run.json", tiny_run_config(out));
  const auto t = run("train --config " + rc.string());
  ASSERT_EQ(t.code, 0);
  for (const char* f : {"config.json", "train_log.csv", "checkpoint.bin", "metrics.txt", "layers.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(slurp(out / "train_log.csv").rfind("step,loss\n", 0), 0u);

  const auto synth = write("tiny.json", kTinySynth);
  const auto ds = (work_dir() / "eval.ds").string();
  ASSERT_EQ(run("gen-data --config " + synth.string() + " --out " + ds).code, 0);
  const std::string ckpt = (out / "checkpoint.bin").string();
  const auto dec = run("eval --checkpoint " + ckpt + " --dataset " + ds + " --out " + (work_dir() / "ev_dec").string());
  const auto plain = run("eval --plain-forward --checkpoint " + ckpt + " --dataset " + ds + " --out " +
                         (work_dir() / "ev_plain").string());
  ASSERT_EQ(dec.code, 0);
  ASSERT_EQ(plain.code, 0);
  EXPECT_EQ(dec.out, plain.out);
  EXPECT_EQ(slurp(work_dir() / "ev_dec" / "metrics.txt"), slurp(work_dir() / "ev_plain" / "metrics.txt"));

  const auto an = run("analyze --checkpoint " + ckpt + " --dataset " + ds + " --mp-layers 1,3");
  EXPECT_EQ(an.code, 0);
  EXPECT_EQ(run("analyze --checkpoint " + ckpt + " --dataset " + ds + " --mp-layers 1,x").code, 2);
  EXPECT_EQ(run("analyze --checkpoint " + ckpt + " --dataset " + ds + " --mp-layers 4").code, 2);
}

TEST(Cli, UnknownVariantIsConfigError) {
  const auto rc = write("v.json", tiny_run_config(work_dir() / "v"));
  EXPECT_EQ(run("train --config " + rc.string() + " --variant mp-everything").code, 2);
}

TEST(Cli, CorruptCheckpointIsIoError) {
  const auto bad = write("bad.ckpt", "not a checkpoint");
  const auto synth = write("tiny.json", kTinySynth);
  const auto ds = (work_dir() / "c2.ds").string();
  ASSERT_EQ(run("gen-data --config " + synth.string() + " --out " + ds).code, 0);
  EXPECT_EQ(run("eval --checkpoint " + bad.string() + " --dataset " + ds).code, 3);
}

TEST(Cli, GradCheckPasses) {
  const auto r = run("grad-check");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("all passed"), std::string::npos);
}

TEST(Cli, RefineStudyCsvSchema) {
  const auto cfg = write("refine.json", R"({"sigmas": [0.0, 0.3], "samples_per_sigma": 20})");
  const auto csv = work_dir() / "refine.csv";
  const auto r = run("refine-study --config " + cfg.string() + " --out " + csv.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("counterexamples: 0"), std::string::npos);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "index,sigma,T0,T1,t0,t1,sum_alpha,sum_beta,weight_ratio,ratio_bound,condition,"
            "interval_lo,interval_hi,separable,status");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 14) << line;
  }
  EXPECT_EQ(rows, 40u);
}
