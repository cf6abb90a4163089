#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "rcm/dataset.hpp"
#include "rcm/errors.hpp"

using namespace rcm;
using namespace rcm::cli;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rcm_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

struct Outcome {
  int code;
  std::string err;
};

Outcome rcm_run(std::vector<std::string> args) {
  args.insert(args.begin(), "rcm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), err);
  return {code, err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST(RunConfig, DefaultsMatchDocumentedValues) {
  RunConfig c;
  EXPECT_EQ(get_value(c, "schedule.sigma_min"), "0.002");
  EXPECT_EQ(get_value(c, "schedule.sigma_max"), "80");
  EXPECT_EQ(get_value(c, "schedule.sigma_data"), "0.5");
  EXPECT_EQ(get_value(c, "schedule.n_levels"), "10");
  EXPECT_EQ(get_value(c, "sampler.tau"), "0.95");
  EXPECT_EQ(get_value(c, "sampler.p_large"), "0.95");
  EXPECT_EQ(get_value(c, "train.lambda_consist"), "1");
  EXPECT_EQ(get_value(c, "train.lambda_fixed"), "0.3");
  EXPECT_EQ(get_value(c, "train.iterations"), "2000");
  EXPECT_EQ(get_value(c, "train.batch_size"), "4");
  EXPECT_EQ(get_value(c, "reflectance.base_width"), "16");
  EXPECT_EQ(get_value(c, "reflectance.channel_multipliers"), "1,2,4");
  EXPECT_EQ(get_value(c, "enhance.ema"), "true");
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, ManifestRoundTripsThroughParser) {
  auto dir = temp_dir("manifest");
  fs::create_directories(dir);
  RunConfig c;
  set_value(c, "run.seed", "18446744073709551615");
  set_value(c, "train.learning_rate", "0.1");
  set_value(c, "illumination.channel_multipliers", "1, 2");
  set_value(c, "train.noise_emphasis", "false");
  set_value(c, "paths.data", "some/dir");
  write_manifest(dir / "a.ini", c, "test");
  RunConfig back;
  apply_config_file(back, dir / "a.ini");
  write_manifest(dir / "b.ini", back, "test");
  EXPECT_EQ(slurp(dir / "a.ini"), slurp(dir / "b.ini"));
  EXPECT_EQ(back.seed, 18446744073709551615ull);
  EXPECT_EQ(back.train.learning_rate, 0.1);
  EXPECT_EQ(back.illumination.channel_multipliers, (std::vector<int>{1, 2}));
  EXPECT_FALSE(back.train.noise_emphasis);
  EXPECT_EQ(back.paths.data, "some/dir");
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  auto dir = temp_dir("badcfg");
  fs::create_directories(dir);
  RunConfig c;
  EXPECT_THROW(set_value(c, "train.learning_rat", "1"), ConfigError);
  EXPECT_THROW(set_value(c, "train.batch_size", "four"), ConfigError);
  EXPECT_THROW(set_value(c, "train.batch_size", "4.5"), ConfigError);
  EXPECT_THROW(set_value(c, "enhance.ema", "maybe"), ConfigError);
  std::ofstream(dir / "unknown.ini") << "[train]\nbogus = 1\n";
  EXPECT_THROW(apply_config_file(c, dir / "unknown.ini"), ConfigError);
  std::ofstream(dir / "nosection.ini") << "seed = 1\n";
  EXPECT_THROW(apply_config_file(c, dir / "nosection.ini"), ConfigError);
  std::ofstream(dir / "dup.ini") << "[run]\nseed = 1\nseed = 2\n";
  EXPECT_THROW(apply_config_file(c, dir / "dup.ini"), ConfigError);
  EXPECT_THROW(apply_config_file(c, dir / "missing.ini"), IoError);

  std::ofstream(dir / "ok.ini") << "; comment\n[train]\nbatch_size = 2\n\n[run]\nseed=5\n";
  apply_config_file(c, dir / "ok.ini");
  EXPECT_EQ(c.train.batch_size, 2);
  EXPECT_EQ(c.seed, 5u);
}

TEST(Cli, ExitCodesCarryErrorCategory) {
  auto r = rcm_run({"no-such-command"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: usage:", 0), 0u) << r.err;

  r = rcm_run({"inspect-schedule", "--set", "nope.key=1", "--out", temp_dir("x").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error: config:", 0), 0u) << r.err;

  r = rcm_run({"inspect-schedule", "--set", "schedule.sigma_min=100", "--out", temp_dir("x").string()});
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.err.rfind("error: invalid_argument:", 0), 0u) << r.err;

  r = rcm_run({"inspect-schedule"});
  EXPECT_EQ(r.code, 4) << r.err;
}

TEST(Cli, MakeToydataSingleAndDeterministic) {
  auto a = temp_dir("toy_a"), b = temp_dir("toy_b"), one = temp_dir("toy_one");
  ASSERT_EQ(rcm_run({"make-toydata", "--count", "1", "--out", one.string()}).code, 0);
  EXPECT_EQ(count_files(one), 3u);
  EXPECT_TRUE(fs::exists(one / "low" / "toy_0000.png"));
  EXPECT_TRUE(fs::exists(one / "normal" / "toy_0000.png"));
  EXPECT_TRUE(fs::exists(one / "manifest.txt"));

  ASSERT_EQ(rcm_run({"make-toydata", "--count", "5", "--seed", "9", "--out", a.string()}).code, 0);
  ASSERT_EQ(rcm_run({"make-toydata", "--count", "5", "--seed", "9", "--out", b.string()}).code, 0);
  ASSERT_EQ(count_files(a), count_files(b));
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_EQ(load_paired_dataset(a).size(), 5u);
}

TEST(Cli, MakeToydataRejectsUnwritablePath) {
  auto blocker = temp_dir("blocker");
  std::ofstream(blocker.string()) << "file";
  auto r = rcm_run({"make-toydata", "--count", "1", "--out", (blocker / "sub").string()});
  EXPECT_EQ(r.code, 6);
  EXPECT_EQ(r.err.rfind("error: io:", 0), 0u) << r.err;
  fs::remove(blocker);
}

TEST(Cli, InspectCommandsWriteCsv) {
  auto dir = temp_dir("inspect");
  ASSERT_EQ(rcm_run({"inspect-schedule", "--out", dir.string()}).code, 0);
  auto rows = lines(dir / "schedule.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "n,sigma,c_skip,c_out,c_in,snr_weight");
  EXPECT_EQ(rows[1].rfind("0,0.002,1,0,", 0), 0u) << rows[1];
  EXPECT_EQ(rows[10].rfind("9,80,", 0), 0u) << rows[10];

  ASSERT_EQ(rcm_run({"inspect-sampler", "--out", dir.string(), "--draws", "1000", "--bins", "8"}).code, 0);
  rows = lines(dir / "sampler_histogram.csv");
  ASSERT_EQ(rows.size(), 9u);
  long bimodal = 0, uniform = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::string f[5];
    for (auto& x : f) std::getline(ss, x, ',');
    bimodal += std::stol(f[3]);
    uniform += std::stol(f[4]);
  }
  EXPECT_EQ(bimodal, 1000);
  EXPECT_EQ(uniform, 1000);
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = temp_dir("pipeline");
    ASSERT_EQ(rcm_run({"make-toydata", "--count", "3", "--size", "16", "--seed", "4", "--out",
                       (root_ / "data").string()})
                  .code,
              0);
    ASSERT_EQ(rcm_run({"train", "--data", (root_ / "data").string(), "--out", (root_ / "run").string(),
                       "--iterations", "2", "--set", "train.patch_size=16", "--set", "train.checkpoint_every=1"})
                  .code,
              0);
  }
  static fs::path root_;
};
fs::path CliPipeline::root_;

TEST_F(CliPipeline, TrainWritesHistoryCheckpointsAndManifest) {
  auto rows = lines(root_ / "run" / "loss.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "step,L_consist,L_fixed,L_total");
  EXPECT_EQ(rows[1].rfind("1,", 0), 0u);
  for (const char* f : {"reflectance.ckpt", "illumination.ckpt", "checkpoints/step_000000_reflectance.ckpt",
                        "checkpoints/step_000001_illumination.ckpt", "checkpoints/step_000002_reflectance.ckpt"}) {
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  }
  const auto manifest = slurp(root_ / "run" / "manifest.txt");
  EXPECT_NE(manifest.find("iterations = 2"), std::string::npos);
  EXPECT_NE(manifest.find("patch_size = 16"), std::string::npos);
}

TEST_F(CliPipeline, ZeroIterationsWritesInitialCheckpointAndEmptyHistory) {
  auto out = root_ / "zero";
  ASSERT_EQ(rcm_run({"train", "--data", (root_ / "data").string(), "--out", out.string(), "--iterations", "0"}).code,
            0);
  EXPECT_EQ(lines(out / "loss.csv"), (std::vector<std::string>{"step,L_consist,L_fixed,L_total"}));
  EXPECT_TRUE(fs::exists(out / "reflectance.ckpt"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "step_000000_illumination.ckpt"));
  EXPECT_EQ(DenoiserModel::load(out / "reflectance.ckpt").config(), DenoiserConfig::reflectance());
}

TEST_F(CliPipeline, AblationFlagsReachTheManifest) {
  auto out = root_ / "ablate";
  ASSERT_EQ(rcm_run({"train", "--data", (root_ / "data").string(), "--out", out.string(), "--iterations", "0",
                     "--no-fixed-loss", "--no-noise-emphasis"})
                .code,
            0);
  const auto manifest = slurp(out / "manifest.txt");
  EXPECT_NE(manifest.find("lambda_fixed = 0\n"), std::string::npos);
  EXPECT_NE(manifest.find("noise_emphasis = false"), std::string::npos);
}

TEST_F(CliPipeline, TrainRejectsOrphansByName) {
  auto data = root_ / "orphans";
  fs::create_directories(data / "low");
  fs::create_directories(data / "normal");
  fs::copy_file(root_ / "data" / "low" / "toy_0000.png", data / "low" / "only_low.png");
  fs::copy_file(root_ / "data" / "normal" / "toy_0000.png", data / "normal" / "only_normal.png");
  auto r = rcm_run({"train", "--data", data.string(), "--out", (root_ / "orphan_run").string()});
  EXPECT_EQ(r.code, 5);
  EXPECT_EQ(r.err.rfind("error: data:", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("only_low.png"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("only_normal.png"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, EnhanceSingleFileAndDirectory) {
  auto single = root_ / "enh_single";
  ASSERT_EQ(rcm_run({"enhance", "--checkpoints", (root_ / "run").string(), "--input",
                     (root_ / "data" / "low" / "toy_0001.png").string(), "--out", single.string()})
                .code,
            0);
  EXPECT_TRUE(fs::exists(single / "toy_0001_enhanced.png"));
  EXPECT_EQ(lines(single / "enhance.csv").size(), 2u);

  auto dir = root_ / "enh_dir";
  ASSERT_EQ(rcm_run({"enhance", "--checkpoints", (root_ / "run").string(), "--input",
                     (root_ / "data" / "low").string(), "--out", dir.string(), "--no-ema"})
                .code,
            0);
  auto rows = lines(dir / "enhance.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i + 1].rfind("toy_000" + std::to_string(i) + ".png,toy_000" + std::to_string(i) + "_enhanced.png,", 0),
              0u);
  }
  EXPECT_NE(slurp(dir / "manifest.txt").find("ema = false"), std::string::npos);
}

TEST_F(CliPipeline, EnhanceRejectsMissingCheckpoint) {
  auto r = rcm_run({"enhance", "--checkpoints", (root_ / "nowhere").string(), "--input",
                    (root_ / "data" / "low").string(), "--out", (root_ / "enh_missing").string()});
  EXPECT_EQ(r.code, 6);
  EXPECT_EQ(r.err.rfind("error: io: missing checkpoint", 0), 0u) << r.err;
}

TEST_F(CliPipeline, EvalIdentityAndRejections) {
  auto out = root_ / "eval_same";
  ASSERT_EQ(rcm_run({"eval", "--enhanced", (root_ / "data" / "normal").string(), "--reference",
                     (root_ / "data" / "normal").string(), "--out", out.string()})
                .code,
            0);
  auto rows = lines(out / "metrics.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "# metric_space=rgb");
  EXPECT_EQ(rows[1], "filename,psnr,ssim,mae,wall_time_seconds");
  EXPECT_EQ(rows[5], "mean,99,1,0,NA");

  auto empty = root_ / "empty_dir";
  fs::create_directories(empty);
  auto r = rcm_run({"eval", "--enhanced", empty.string(), "--reference", empty.string(), "--out",
                    (root_ / "eval_empty").string()});
  EXPECT_EQ(r.code, 5) << r.err;

  r = rcm_run({"eval", "--enhanced", (root_ / "orphans" / "low").string(), "--reference",
               (root_ / "data" / "normal").string(), "--out", (root_ / "eval_orphans").string()});
  if (fs::exists(root_ / "orphans")) {
    EXPECT_EQ(r.code, 5);
    EXPECT_NE(r.err.find("only_low.png"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("toy_0000.png"), std::string::npos) << r.err;
  }
}

TEST_F(CliPipeline, EvalStripsSuffixAndReadsWallTimes) {
  auto enh = root_ / "enh_eval";
  ASSERT_EQ(rcm_run({"enhance", "--checkpoints", (root_ / "run").string(), "--input",
                     (root_ / "data" / "low").string(), "--out", enh.string()})
                .code,
            0);
  auto out = root_ / "eval_enh";
  ASSERT_EQ(rcm_run({"eval", "--enhanced", enh.string(), "--reference", (root_ / "data" / "normal").string(),
                     "--out", out.string()})
                .code,
            0);
  auto rows = lines(out / "metrics.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[2].rfind("toy_0000_enhanced.png,", 0), 0u);
  EXPECT_EQ(rows[2].find("NA"), std::string::npos);
}
