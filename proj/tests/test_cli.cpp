#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "dkrg/checkpoint.hpp"
#include "dkrg/image_io.hpp"
#include "dkrg/parallel.hpp"
#include "oracles.hpp"
#include "run_config.hpp"

using namespace dkrg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dkrg_test_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "data");
    write_image(quantize(oracle::smooth_image(48, 50)), dir_ / "data" / "a.png");
    write_image(quantize(oracle::smooth_image(44, 42, 0.7)), dir_ / "data" / "b.pgm");
    set_thread_count(1);
  }
  void TearDown() override {
    set_thread_count(-1);
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<std::string> tiny_train_args(const std::string& out) const {
    return {"train", "--data", path("data"), "--out", path(out), "--iterations", "2",
            "--seed", "3", "--batch-size", "2", "--scales", "2", "--radius", "1",
            "--feature-depth", "4", "--residual-units", "1"};
  }

  fs::path dir_;
};

}  // namespace

TEST(RunConfig, ParsesKeyValueLines) {
  const auto cfg = cli::RunConfig::parse("# comment\n\nscale = 3\n  seed=7  # trailing\n");
  EXPECT_EQ(cfg.get("scale"), "3");
  EXPECT_EQ(cfg.get("seed"), "7");
  EXPECT_FALSE(cfg.has("iterations"));
}

TEST(RunConfig, RejectsBadLines) {
  EXPECT_THROW(cli::RunConfig::parse("colour = red\n"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::parse("scale = 2\nscale = 3\n"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::parse("scale 2\n"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::parse("scale =\n"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::load("/nonexistent/run.cfg"), cli::UsageError);
  EXPECT_TRUE(cli::known_config_keys().count("learning_rate"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({"--version"}).code, cli::kExitOk);
  EXPECT_EQ(run_cli({"sr", path("missing.png"), path("o.png"), "--scale", "2"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"sr", path("data/a.png"), path("o.png"), "--method", "deep"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"sr", path("data/a.png"), path("o.png"), "--method", "magic"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"degrade", path("data/a.png"), path("o.png"), "--scale", "0"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"eval", "--hr-dir", path("nowhere"), "--scale", "2"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--data", path("nowhere"), "--out", path("x.ckpt")}).code,
            cli::kExitUsage);

  std::ofstream(path("bad.ckpt")) << "not a checkpoint";
  EXPECT_EQ(run_cli({"sr", path("data/a.png"), path("o.png"), "--method", "deep", "--checkpoint",
                     path("bad.ckpt")})
                .code,
            cli::kExitUsage);
}

TEST_F(CliTest, DegradeDimsAndConstant) {
  write_image(Image(321, 481, 90.0), path("big.png"));
  const Result r = run_cli({"degrade", path("big.png"), path("lr.png"), "--scale", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const ColorImage lr = read_image(path("lr.png"));
  EXPECT_EQ(lr.height, 320);
  EXPECT_EQ(lr.width, 480);
  for (double v : lr.data) EXPECT_EQ(v, 90.0);
  const ColorImage hr = read_image(path("lr_hr.png"));
  EXPECT_EQ(hr.height, 320);
}

TEST_F(CliTest, SrBicubicConstant) {
  write_image(Image(10, 12, 33.0), path("c.png"));
  ASSERT_EQ(run_cli({"sr", path("c.png"), path("c_sr.png"), "--scale", "3"}).code, 0);
  const ColorImage out = read_image(path("c_sr.png"));
  EXPECT_EQ(out.height, 30);
  for (double v : out.data) EXPECT_EQ(v, 33.0);
}

TEST_F(CliTest, ZeroIterationTrainAndDeterministicDeepSr) {
  auto args = tiny_train_args("m.ckpt");
  args[6] = "0";
  const Result t = run_cli(args);
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("checkpoint: "), std::string::npos);
  const Checkpoint ck = load_checkpoint(path("m.ckpt"));
  EXPECT_EQ(ck.iteration, 0u);
  EXPECT_EQ(encode_checkpoint(ck).size(), encode_checkpoint(initial_checkpoint(ck.params.config, 3)).size());

  const std::vector<std::string> sr{"sr", path("data/b.pgm"), path("d1.png"), "--method", "deep",
                                    "--scale", "2", "--checkpoint", path("m.ckpt"),
                                    "--variance-out", path("v.pgm")};
  ASSERT_EQ(run_cli(sr).code, 0);
  auto sr2 = sr;
  sr2[2] = path("d2.png");
  sr2[10] = path("v2.pgm");
  ASSERT_EQ(run_cli(sr2).code, 0);
  EXPECT_EQ(slurp(path("d1.png")), slurp(path("d2.png")));
  EXPECT_EQ(slurp(path("v.pgm")), slurp(path("v2.pgm")));
  EXPECT_TRUE(fs::exists(path("v.pgm.txt")));
}

TEST_F(CliTest, StrictTrainingIsByteIdentical) {
  ASSERT_EQ(run_cli(tiny_train_args("r1.ckpt")).code, 0);
  ASSERT_EQ(run_cli(tiny_train_args("r2.ckpt")).code, 0);
  EXPECT_EQ(slurp(path("r1.ckpt")), slurp(path("r2.ckpt")));
  EXPECT_EQ(slurp(path("r1.ckpt.log.csv")), slurp(path("r2.ckpt.log.csv")));
  EXPECT_EQ(load_checkpoint(path("r1.ckpt")).iteration, 2u);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  std::ofstream(path("run.cfg")) << "iterations = 1\nseed = 3\nbatch_size = 2\nscales = 2\n"
                                    "radius = 1\nfeature_depth = 4\nresidual_units = 1\n"
                                    "window = 30  # used by other commands only\n";
  Result r = run_cli({"--config", path("run.cfg"), "train", "--data", path("data"), "--out",
                      path("c.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(path("c.ckpt")).iteration, 1u);
  r = run_cli({"--config", path("run.cfg"), "train", "--data", path("data"), "--out",
               path("c2.ckpt"), "--iterations", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(path("c2.ckpt")).iteration, 2u);

  std::ofstream(path("bad.cfg")) << "flavour = strange\n";
  EXPECT_EQ(run_cli({"--config", path("bad.cfg"), "eval", "--hr-dir", path("data")}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, EvalOracleWritesCsv) {
  const Result r = run_cli({"eval", "--hr-dir", path("data"), "--method", "oracle", "--scale", "2",
                            "--out-csv", path("e.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("e.csv")),
            "image,method,scale,psnr_db,ssim\n"
            "a,oracle,2,inf,1.000000\n"
            "b,oracle,2,inf,1.000000\n"
            "mean,oracle,2,inf,1.000000\n");
}
