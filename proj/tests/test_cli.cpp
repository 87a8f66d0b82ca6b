#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "rgcseg/checkpoint.hpp"
#include "rgcseg/cli.hpp"
#include "rgcseg/render.hpp"
#include "rgcseg/synth.hpp"
#include "rgcseg/train.hpp"

using namespace rgcseg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rgcseg_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small, quick training setup shared by several tests.
void write_small_config(const fs::path& p) {
  std::ofstream(p) << "# tiny model\nmodel.C=4\nmodel.d=4\ntrain.steps=3\ntrain.lr=0.01\n";
}

fs::path small_data(const std::string& name, std::size_t num = 4) {
  const auto dir = temp_dir(name);
  EXPECT_EQ(cli({"gen-data", "--out", (dir / "data").string(), "--num", std::to_string(num),
                 "--seed", "1", "--size", "16"})
                .code,
            kExitOk);
  write_small_config(dir / "cfg.txt");
  return dir;
}

// Identity network on features that are the masks themselves: every layer
// passes {0,1} through unchanged and the logit layer maps m to 2m - 1.
void write_perfect_checkpoint(const fs::path& ckpt, std::size_t hw) {
  ModelConfig cfg;
  cfg.in_channels = kNumClasses;
  cfg.channels = kNumClasses;
  cfg.height = cfg.width = hw;
  cfg.use_rgc = false;
  TrainState s = build_model(cfg, 0);
  const std::size_t k = kNumClasses;
  for (auto& [name, p] : s.params) std::fill(p.data().begin(), p.data().end(), 0.0f);
  auto eye = [&](const std::string& name, float v, std::size_t ksize) {
    auto& w = s.params.at(name);
    const std::size_t centre = (ksize / 2) * ksize + ksize / 2;
    for (std::size_t c = 0; c < k; ++c) w[(c * k + c) * ksize * ksize + centre] = v;
  };
  eye("enc.lift.w", 1.0f, 1);
  for (std::size_t l = 0; l < kHeadHiddenLayers; ++l) eye("head." + std::to_string(l) + ".w", 1.0f, 3);
  eye("head.8.w", 2.0f, 1);
  for (auto& b : s.params.at("head.8.b").data()) b = -1.0f;
  save_checkpoint(ckpt, s);
}

Dataset mask_feature_dataset(std::size_t num, std::size_t hw) {
  SceneSpec spec;
  spec.height = spec.width = hw;
  Dataset ds = generate_dataset(9, num, spec);
  ds.spec.in_channels = kNumClasses;
  for (auto& s : ds.samples) s.features = s.masks;
  return ds;
}

}  // namespace

TEST(Cli, VariantLetters) {
  EXPECT_EQ(variant_letter(false, false), 'A');
  EXPECT_EQ(variant_letter(false, true), 'B');
  EXPECT_EQ(variant_letter(true, false), 'C');
  EXPECT_EQ(variant_letter(true, true), 'E');
}

TEST(Cli, UsageErrorsExitTwoWithOneLine) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"bogus"},
           {"gen-data", "--out", "x", "--num", "0", "--seed", "1", "--size", "32"},
           {"gen-data", "--out", "x"},
           {"train", "--data", "/nonexistent/dir", "--out", "c.rgct"},
           {"eval", "--ckpt", "/nonexistent.rgct", "--data", ".", "--report", "r.csv"},
           {"render", "--ckpt", "/nonexistent.rgct", "--data", ".", "--out", "o"},
       }) {
    const auto r = cli(args);
    EXPECT_EQ(r.code, kExitUsage) << (args.empty() ? "<none>" : args[0]);
    EXPECT_EQ(lines(r.err), 1u) << r.err;
  }
}

TEST(Cli, GenDataWritesFilesAndIsByteDeterministic) {
  const auto dir = temp_dir("gen");
  const std::vector<std::string> base = {"gen-data", "--num", "8", "--seed", "1", "--size", "32"};
  auto with_out = [&](const fs::path& p) {
    auto a = base;
    a.insert(a.begin() + 1, {"--out", p.string()});
    return a;
  };
  ASSERT_EQ(cli(with_out(dir / "a")).code, kExitOk);
  ASSERT_EQ(cli(with_out(dir / "b")).code, kExitOk);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
  }
  EXPECT_EQ(files, 9u);
  fs::remove_all(dir);
}

TEST(Cli, GenDataIoFailureExitsOne) {
  const auto dir = temp_dir("genio");
  std::ofstream(dir / "blocker") << "file";
  const auto r = cli({"gen-data", "--out", (dir / "blocker" / "sub").string(), "--num", "1", "--seed",
                      "1", "--size", "16"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_EQ(lines(r.err), 1u);
  fs::remove_all(dir);
}

TEST(Cli, TrainZeroStepsWritesInitialCheckpointAndEmptyLog) {
  const auto dir = small_data("zero");
  const auto ckpt = dir / "c.rgct";
  const auto r = cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                      "--out", ckpt.string(), "--steps", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ck = load_checkpoint(ckpt);
  EXPECT_EQ(ck.state.step, 0u);
  EXPECT_EQ(slurp(ckpt.string() + ".loss.csv"), "step,loss\n");
  fs::remove_all(dir);
}

TEST(Cli, FlagsOverrideConfigAndEchoRoundTrips) {
  const auto dir = small_data("echo");
  const auto ckpt = dir / "c.rgct";
  const auto r = cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                      "--out", ckpt.string(), "--steps", "2", "--no-rgc", "--lr", "0.02", "--seed", "5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ck = load_checkpoint(ckpt);
  EXPECT_EQ(ck.meta.at("train.steps"), "2");
  EXPECT_EQ(ck.meta.at("train.lr"), "0.02");
  EXPECT_EQ(ck.meta.at("model.C"), "4");
  EXPECT_EQ(ck.meta.at("model.use_rgc"), "false");
  EXPECT_EQ(ck.meta.at("variant"), "C");
  EXPECT_EQ(ck.state.seed, 5u);

  // Re-parsing the echoed record reproduces the resolved configuration.
  ModelConfig cfg;
  cfg.apply(ck.meta);
  TrainOptions opt;
  opt.apply(ck.meta);
  KeyValues again;
  cfg.echo(again);
  opt.echo(again);
  for (const auto& [k, v] : again) EXPECT_EQ(ck.meta.at(k), v) << k;
  EXPECT_EQ(opt.steps, 2u);
  EXPECT_EQ(opt.lr, 0.02);
  EXPECT_FALSE(cfg.use_rgc);
  EXPECT_EQ(cfg.channels, 4u);
  fs::remove_all(dir);
}

TEST(Cli, TrainLogHasOneRowPerStep) {
  const auto dir = small_data("log");
  const auto ckpt = dir / "c.rgct";
  ASSERT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                 "--out", ckpt.string(), "--log", (dir / "log.csv").string()})
                .code,
            kExitOk);
  const auto log = slurp(dir / "log.csv");
  EXPECT_EQ(lines(log), 4u);
  EXPECT_EQ(log.rfind("step,loss\n0,", 0), 0u);
  EXPECT_EQ(load_checkpoint(ckpt).state.step, 3u);
  fs::remove_all(dir);
}

TEST(Cli, DivergentTrainingExitsOneAndKeepsCheckpoint) {
  const auto dir = small_data("diverge");
  const auto ckpt = dir / "c.rgct";
  const auto r = cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                      "--out", ckpt.string(), "--lr", "1e30", "--steps", "20"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_EQ(lines(r.err), 1u) << r.err;
  ASSERT_TRUE(fs::exists(ckpt));
  for (const auto& [name, p] : load_checkpoint(ckpt).state.params) EXPECT_TRUE(p.all_finite()) << name;
  fs::remove_all(dir);
}

TEST(Cli, EvalReportEndsWithMeanAndEchoesConfig) {
  const auto dir = small_data("eval");
  const auto ckpt = dir / "c.rgct", report = dir / "r.csv";
  ASSERT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                 "--out", ckpt.string()})
                .code,
            kExitOk);
  const auto r = cli({"eval", "--ckpt", ckpt.string(), "--data", (dir / "data").string(), "--report",
                      report.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto text = slurp(report);
  std::istringstream is(text);
  std::string line, last;
  KeyValues echoed;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      echoed[line.substr(2, eq - 2)] = line.substr(eq + 1);
    } else {
      ++rows;
      last = line;
    }
  }
  EXPECT_EQ(rows, kNumClasses + 2);  // class,iou header + classes + mean
  EXPECT_EQ(last.rfind("mean,", 0), 0u);
  EXPECT_EQ(echoed.at("model.C"), "4");
  EXPECT_EQ(echoed.at("train.lr"), "0.01");
  EXPECT_EQ(echoed.at("eval.data.count"), "4");
  fs::remove_all(dir);
}

TEST(Cli, EvalShapeMismatchNamesBothShapes) {
  const auto dir = small_data("mismatch");
  const auto ckpt = dir / "c.rgct";
  ASSERT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                 "--out", ckpt.string(), "--steps", "0"})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"gen-data", "--out", (dir / "big").string(), "--num", "1", "--seed", "1", "--size", "32"})
                .code,
            kExitOk);
  const auto r = cli({"eval", "--ckpt", ckpt.string(), "--data", (dir / "big").string(), "--report",
                      (dir / "r.csv").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("(4,16,16)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("(4,32,32)"), std::string::npos) << r.err;
  EXPECT_EQ(lines(r.err), 1u);
  fs::remove_all(dir);
}

TEST(Cli, EndToEndReportsAreBitIdentical) {
  auto run = [](const std::string& tag) {
    const auto dir = small_data("e2e_" + tag);
    const auto ckpt = dir / "c.rgct", report = dir / "r.csv";
    EXPECT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", (dir / "cfg.txt").string(),
                   "--out", ckpt.string()})
                  .code,
              kExitOk);
    EXPECT_EQ(cli({"eval", "--ckpt", ckpt.string(), "--data", (dir / "data").string(), "--report",
                   report.string()})
                  .code,
              kExitOk);
    auto out = std::make_pair(slurp(ckpt), slurp(report));
    fs::remove_all(dir);
    return out;
  };
  const auto a = run("a"), b = run("b");
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Cli, GradcheckRowsAndExitCodes) {
  const auto def = cli({"gradcheck"});
  EXPECT_EQ(def.code, kExitOk) << def.out;
  EXPECT_GE(lines(def.out), 9u);  // header + >= 8 rows
  EXPECT_EQ(def.out.find("FAIL"), std::string::npos);

  const auto bad = cli({"gradcheck", "--sabotage", "matmul"});
  EXPECT_EQ(bad.code, kExitFailure);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, GradcheckFullListsEndToEndRows) {
  const auto r = cli({"gradcheck", "--full"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("rgc_forward"), std::string::npos);
  EXPECT_NE(r.out.find("loss@model"), std::string::npos);
}

TEST(Render, PgmFormat) {
  TensorF plane({3, 5});
  plane[0] = 1.0f;
  plane[14] = 1.0f;
  const std::string pgm = encode_pgm(plane);
  const std::string header = "P5\n5 3\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 15);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + i]), (i == 0 || i == 14) ? 255 : 0);
  }
}

TEST(Render, CompositeUsesPalette) {
  TensorF masks({kNumClasses, 1, kNumClasses + 1});
  for (std::size_t k = 0; k < kNumClasses; ++k) masks[k * (kNumClasses + 1) + k] = 1.0f;
  const std::string ppm = encode_composite_ppm(masks);
  const std::string header = "P6\n" + std::to_string(kNumClasses + 1) + " 1\n255\n";
  ASSERT_EQ(ppm.substr(0, header.size()), header);
  for (std::size_t k = 0; k <= kNumClasses; ++k) {
    const Rgb want = k < kNumClasses ? kClassPalette[k] : Rgb{0, 0, 0};
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(static_cast<std::uint8_t>(ppm[header.size() + 3 * k + c]), want[c]) << k;
    }
  }
}

TEST(Render, PerfectCheckpointReproducesGroundTruth) {
  const auto dir = temp_dir("render");
  write_dataset(mask_feature_dataset(2, 16), dir / "data");
  write_perfect_checkpoint(dir / "c.rgct", 16);
  const auto r = cli({"render", "--ckpt", (dir / "c.rgct").string(), "--data", (dir / "data").string(),
                      "--out", (dir / "img").string(), "--num", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (std::size_t i = 0; i < 2; ++i) {
    for (const auto name : kClassNames) {
      char pred[96], gt[96];
      std::snprintf(pred, sizeof(pred), "sample_%06zu_pred_%s.pgm", i, std::string(name).c_str());
      std::snprintf(gt, sizeof(gt), "sample_%06zu_gt_%s.pgm", i, std::string(name).c_str());
      const auto p = slurp(dir / "img" / pred);
      EXPECT_FALSE(p.empty()) << pred;
      EXPECT_EQ(p, slurp(dir / "img" / gt)) << pred;
      EXPECT_EQ(p.rfind("P5\n16 16\n255\n", 0), 0u);
    }
    char comp[64];
    std::snprintf(comp, sizeof(comp), "sample_%06zu_composite.ppm", i);
    EXPECT_TRUE(fs::exists(dir / "img" / comp)) << comp;
  }

  const auto ev = cli({"eval", "--ckpt", (dir / "c.rgct").string(), "--data", (dir / "data").string(),
                       "--report", (dir / "r.csv").string()});
  ASSERT_EQ(ev.code, kExitOk) << ev.err;
  EXPECT_NE(slurp(dir / "r.csv").find("mean,1.000000"), std::string::npos);
  fs::remove_all(dir);
}

#ifdef RGCSEG_TOOL_PATH
TEST(Tool, ProcessExitCodes) {
  auto status = [](const std::string& args) {
    const std::string cmd = std::string(RGCSEG_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const auto dir = temp_dir("tool");
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status(""), 2);
  EXPECT_EQ(status("gen-data --out " + (dir / "d").string() + " --num 0 --seed 1 --size 32"), 2);
  EXPECT_EQ(status("gen-data --out " + (dir / "d").string() + " --num 2 --seed 1 --size 16"), 0);
  EXPECT_EQ(status("eval --ckpt " + (dir / "none.rgct").string() + " --data " + (dir / "d").string() +
                   " --report " + (dir / "r.csv").string()),
            2);
  EXPECT_EQ(status("gradcheck --sabotage conv2d"), 1);
  fs::remove_all(dir);
}
#endif
