#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dcp/pipeline.hpp"
#include "dcp/synthetic.hpp"
#include "test_support.hpp"

namespace dcp {
namespace {

const fs::path kCli = DCP_CLI_PATH;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = kCli.string() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli");
    const Image bg = cosine_texture(48, 64, 3, 3, 4, 3, 0.3);
    fs::create_directories(dir_ / "static" / "input");
    fs::create_directories(dir_ / "static" / "GT");
    for (int t = 1; t <= 3; ++t) {
      write_image(bg, dir_ / "static" / "input" / FilenamePattern::parse("in%06d.jpg").format(t));
      write_mask(ForegroundMask(48, 64, 0), dir_ / "static" / "GT" / FilenamePattern::parse("gt%06d.png").format(t));
    }
    write_image(bg, dir_ / "truth.png");

    SquareSceneSpec spec;
    spec.height = 160;
    spec.width = 240;
    spec.frames = 6;
    write_scene(make_square_scene(spec), dir_ / "moving", false);
    write_text(
        "patch_size = 96\narch.widths = 4,8,8,8\narch.latent = 8\narch.disc_widths = 4,8\n"
        "harvest.max_patches = 16\ntrain.epochs = 1\ntrain.eta = 0.25\nflow.smoothness = 2\nmask.k = 12\n"
        "texture.channels = 4\ntexture.iterations = 2\n",
        dir_ / "quick.cfg");
  }
  static fs::path dir_;
  fs::path log() const { return dir_ / "log.txt"; }
};

fs::path Cli::dir_;

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("", log()), 2);
  EXPECT_EQ(run("frobnicate", log()), 2);
  EXPECT_EQ(run("estimate", log()), 2);
  EXPECT_EQ(run("estimate " + (dir_ / "absent").string(), log()), 2);
  EXPECT_NE(slurp(log()).find("MissingFrames"), std::string::npos);
  EXPECT_EQ(run("estimate " + (dir_ / "static").string() + " --train-eta 2", log()), 2);
  EXPECT_EQ(run("estimate " + (dir_ / "static").string() + " --no-such-flag 1", log()), 2);
  EXPECT_EQ(run("benchmark " + dir_.string() + " --mode both", log()), 2);
  EXPECT_EQ(run("--version", log()), 0);
  EXPECT_NE(slurp(log()).find(kVersion), std::string::npos);
}

TEST_F(Cli, EstimateSegmentMetricsOnStaticVideo) {
  const fs::path out = dir_ / "est";
  ASSERT_EQ(run("estimate " + (dir_ / "static").string() + " --seed 5 --out " + out.string(), log()), 0)
      << slurp(log());
  const Image bg = read_image(out / "background.png");
  EXPECT_EQ(bg.height, 48);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 5);
  EXPECT_EQ(manifest["command"], "estimate");
  PipelineConfig expect;
  expect.seed = 5;
  EXPECT_EQ(manifest["config_hash"], config_hash(expect));

  const fs::path seg = dir_ / "seg";
  ASSERT_EQ(run("segment " + (dir_ / "static").string() + " --background " + (out / "background.png").string() +
                    " --out " + seg.string(),
                log()),
            0)
      << slurp(log());
  for (int t = 1; t <= 3; ++t) EXPECT_EQ(read_mask(seg / "masks" / mask_filename(t)).count(), 0u);

  const fs::path m = dir_ / "metrics";
  ASSERT_EQ(run("metrics " + (out / "background.png").string() + " " + (dir_ / "truth.png").string() + " --out " +
                    m.string(),
                log()),
            0);
  const std::string csv = slurp(m / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "video,AGE,pEPs,pCEPs,PSNR,MSSSIM,CQM");
  EXPECT_NE(slurp(log()).find("background.png,"), std::string::npos);
  EXPECT_TRUE(fs::exists(m / "metrics.json"));

  ASSERT_EQ(run("metrics " + (seg / "masks").string() + " " + (dir_ / "static" / "GT").string(), log()), 0);
  EXPECT_NE(slurp(log()).find("video,Re,Sp,FNR,PWC,Pre,F"), std::string::npos);
}

TEST_F(Cli, ConfigFileThenFlags) {
  const fs::path out = dir_ / "train";
  ASSERT_EQ(run("train " + (dir_ / "moving").string() + " --config " + (dir_ / "quick.cfg").string() +
                    " --train-eta 0.5 --out " + out.string(),
                log()),
            0)
      << slurp(log());
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["config"]["train.eta"], "0.5");
  EXPECT_EQ(manifest["config"]["patch_size"], "96");
  const Network net = load_checkpoint(out / "model.ckpt");
  EXPECT_EQ(net.generator.arch.input_side, 96);
  EXPECT_EQ(slurp(out / "history.csv").substr(0, 4), "step");
}

TEST_F(Cli, NumericalFailureExitsThree) {
  EXPECT_EQ(run("train " + (dir_ / "moving").string() + " --config " + (dir_ / "quick.cfg").string() +
                    " --train-lr-g inf --out " + (dir_ / "bad").string(),
                log()),
            3)
      << slurp(log());
  EXPECT_NE(slurp(log()).find("DivergedLoss"), std::string::npos);
}

TEST_F(Cli, BenchmarkWritesReports) {
  const fs::path root = dir_ / "bench";
  fs::create_directories(root / "cat");
  fs::copy(dir_ / "static", root / "cat" / "static", fs::copy_options::recursive);
  const fs::path out = dir_ / "bench_out";
  ASSERT_EQ(run("benchmark " + root.string() + " --mode segmentation --out " + out.string(), log()), 0)
      << slurp(log());
  const std::string csv = slurp(out / "segmentation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "video,Re,Sp,FNR,PWC,Pre,F");
  EXPECT_NE(csv.find("cat/static,"), std::string::npos);
  EXPECT_NE(csv.find("\nmean,"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "segmentation.json"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

}  // namespace
}  // namespace dcp
