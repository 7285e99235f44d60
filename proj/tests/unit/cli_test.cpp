#include <gtest/gtest.h>

#include <sstream>

#include "midsg/cli.hpp"
#include "midsg/config.hpp"
#include "midsg/trainer.hpp"
#include "test_util.hpp"

using namespace midsg;
namespace fs = std::filesystem;
using midsg::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

void write_tiny_config(const fs::path& file, const fs::path& data, const fs::path& out) {
  nlohmann::json j{{"data_dir", data.string()}, {"out_dir", out.string()}, {"total_steps", 2},
                   {"batch_size", 4},          {"checkpoint_interval", 2},  {"latent_dim", 16},
                   {"w_dim", 16},              {"base_channels", 4},        {"max_channels", 16},
                   {"disc_fc_dim", 16}};
  midsg::testing::write_file(file, j.dump(2));
}

}  // namespace

TEST(Cli, Datagen) {
  TempDir tmp;
  Result r = run({"datagen", "--out", (tmp / "d").string(), "--per-domain", "4", "--seed", "7"});
  EXPECT_EQ(r.code, 0) << r.err;
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp / "d"))
    if (e.path().extension() == ".png") ++files;
  EXPECT_EQ(files, 12);
}

TEST(Cli, UnknownSubcommand) {
  Result r = run({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
  EXPECT_NE(r.err.find("datagen"), std::string::npos);
}

TEST(Cli, NoSubcommand) { EXPECT_EQ(run({}).code, 1); }

TEST(Cli, MissingConfigNamed) {
  Result r = run({"train", "--config", "missing.file"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.file"), std::string::npos);
}

TEST(Cli, UnknownFlag) {
  TempDir tmp;
  write_tiny_config(tmp / "c.json", tmp / "d", tmp / "run");
  Result r = run({"train", "--config", (tmp / "c.json").string(), "--batch-sise", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("batch-sise"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"datagen", "--out", "x", "--per-domain", "1", "--bogus"}).code, 1);
}

TEST(Cli, HelpDocumentsEveryKey) {
  for (const char* sub : {"datagen", "train", "generate", "evaluate", "pad-bench", "generations"}) {
    Result r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    for (const auto& k : config_keys()) EXPECT_NE(r.out.find(k.name), std::string::npos) << sub << " " << k.name;
  }
}

TEST(Cli, TrainGenerateEvaluate) {
  TempDir tmp;
  ASSERT_EQ(run({"datagen", "--out", (tmp / "d").string(), "--per-domain", "6"}).code, 0);
  write_tiny_config(tmp / "c.json", tmp / "d", tmp / "run");
  Result t = run({"train", "--config", (tmp / "c.json").string(), "--total-steps=3", "--checkpoint-interval", "3"});
  ASSERT_EQ(t.code, 0) << t.err;
  auto record = nlohmann::json::parse(midsg::testing::read_file(tmp / "run/run.json"));
  EXPECT_EQ(record["config"]["total_steps"], 3);
  const fs::path ckpt = tmp / "run/checkpoints/ckpt_000003.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));

  Result g = run({"generate", "--ckpt", ckpt.string(), "--source-dir", (tmp / "d").string(), "--source-domain",
                  "bonafide", "--target-domain", "2", "--out", (tmp / "gen").string(), "--count", "5"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(fs::exists(tmp / "gen/manifest.json"));

  Result e = run({"evaluate", "--real", (tmp / "d").string(), "--synth", (tmp / "d").string(), "--out",
                  (tmp / "rep/realism.json").string(), "--bootstrap", "3"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_TRUE(fs::exists(tmp / "rep/realism.md"));
}

TEST(Cli, RuntimeErrorsExitTwo) {
  TempDir tmp;
  Result r = run({"generate", "--ckpt", (tmp / "none.ckpt").string(), "--source-dir", tmp.path().string(),
                  "--source-domain", "0", "--target-domain", "1", "--out", (tmp / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("none.ckpt"), std::string::npos);
}

TEST(Cli, PadBench) {
  TempDir tmp;
  ASSERT_EQ(run({"datagen", "--out", (tmp / "d").string(), "--per-domain", "8"}).code, 0);
  nlohmann::json cfg{{"data_dir", (tmp / "d").string()},
                     {"out", (tmp / "pad.json").string()},
                     {"detector", {{"widths", {4, 8}}, {"epochs", 1}}}};
  midsg::testing::write_file(tmp / "pad_cfg.json", cfg.dump());
  Result r = run({"pad-bench", "--config", (tmp / "pad_cfg.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = nlohmann::json::parse(midsg::testing::read_file(tmp / "pad.json"));
  EXPECT_EQ(report["arms"].size(), 1u);
  EXPECT_TRUE(fs::exists(tmp / "pad.md"));
}
