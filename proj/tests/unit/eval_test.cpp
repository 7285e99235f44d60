#include <gtest/gtest.h>

#include <cmath>

#include "midsg/eval.hpp"
#include "midsg/generations.hpp"
#include "midsg/errors.hpp"
#include "midsg/image_io.hpp"
#include "test_util.hpp"

using namespace midsg;
namespace fs = std::filesystem;
using midsg::testing::TempDir;

TEST(Realism, IdenticalCorporaScoreZero) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 15, default_toy_domains(), tmp.path());
  FeatureExtractor phi = make_phi(1, 32, 0);
  RealismReport r = realism_report(tmp.path(), tmp.path(), phi, RealismOptions{5, 4, 1});
  ASSERT_EQ(r.domains.size(), 3u);
  double sum = 0;
  for (const auto& d : r.domains) {
    EXPECT_LT(d.fid, 1e-6) << d.domain;
    EXPECT_EQ(d.n_real, 15);
    EXPECT_EQ(d.bootstrap.size(), 5u);
    sum += d.fid;
  }
  EXPECT_DOUBLE_EQ(r.average, sum / 3);
}

TEST(Realism, NoiseScoresWorseThanHeldOutReals) {
  TempDir tmp;
  ToyDomainSpec spec;
  spec.seed = 2;
  generate_toy_dataset(spec, 60, default_toy_domains(), tmp.path());
  DatasetSplit split = split_dataset(tmp.path(), 0.5, 0);
  std::vector<Sample> real, held;
  for (const auto& s : split.train)
    if (s.label.index == 0) real.push_back(s);
  for (const auto& s : split.test)
    if (s.label.index == 0) held.push_back(s);
  Rng rng(3);
  std::vector<Sample> noise;
  fs::create_directories(tmp / "noise");
  for (int i = 0; i < 30; ++i) {
    Image8 img{32, 32, 1, std::vector<std::uint8_t>(1024)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
    fs::path p = tmp / "noise" / image_filename(i);
    write_png(p, img);
    noise.push_back({p, real[0].label});
  }
  FeatureExtractor phi = make_phi(1, 32, 0);
  RealismOptions opt{0, 0, 0};
  const double noise_fid = realism_report({{"d", real, noise}}, phi, opt).average;
  const double held_fid = realism_report({{"d", real, held}}, phi, opt).average;
  EXPECT_GT(noise_fid, held_fid);
}

TEST(Realism, ReportFiles) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 10, default_toy_domains(), tmp / "data");
  FeatureExtractor phi = make_phi(1, 32, 0);
  RealismReport r = realism_report(tmp / "data", tmp / "data", phi, RealismOptions{4, 3, 0});
  write_realism_report(r, tmp / "out/report.json");
  EXPECT_TRUE(fs::exists(tmp / "out/report.json"));
  EXPECT_TRUE(fs::exists(tmp / "out/report.md"));
  EXPECT_TRUE(fs::exists(tmp / "out/report_hist.svg"));
  auto j = nlohmann::json::parse(midsg::testing::read_file(tmp / "out/report.json"));
  EXPECT_EQ(j["domains"].size(), 3u);
  EXPECT_NE(r.histogram_svg().find("<svg"), std::string::npos);
}

TEST(Realism, FlatFolderIsOneGroup) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 4, default_toy_domains(), tmp.path());
  auto groups = domain_folders(tmp / "bonafide");
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups.begin()->second.size(), 4u);
}

TEST(Generations, ReferenceTrajectoryInReport) {
  GenerationsReport r;
  r.fdr_targets = {0.01};
  const std::string md = r.to_markdown();
  for (const char* v : {"19.71", "20.36", "31.64", "49.25", "80.74"}) EXPECT_NE(md.find(v), std::string::npos) << v;
  EXPECT_EQ(r.to_json()["reference_fid"].size(), 5u);
}

TEST(Generations, SingleGenerationIsOneRow) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 12, default_toy_domains(), tmp / "data");
  TrainConfig c;
  c.data_dir = (tmp / "data").string();
  c.out_dir = (tmp / "gens").string();
  c.total_steps = 2;
  c.batch_size = 4;
  c.checkpoint_interval = 2;
  c.network.latent_dim = 16;
  c.network.w_dim = 16;
  c.network.base_channels = 4;
  c.network.max_channels = 16;
  c.network.disc_fc_dim = 16;
  GenerationsOptions opt;
  opt.detector.widths = {4, 8};
  opt.detector.epochs = 1;
  GenerationsReport r = generations_harness(c, 1, opt);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].generation, 1);
  EXPECT_EQ(r.rows[0].train_data, c.data_dir);
  EXPECT_TRUE(std::isfinite(r.rows[0].realism.average));
  EXPECT_EQ(r.rows[0].augmented.tdr.size(), 3u);
  EXPECT_EQ(r.baseline.name, "Experiment-0");
  EXPECT_THROW(generations_harness(c, 0, opt), ValidationError);
}
