#include <gtest/gtest.h>

#include "midsg/config.hpp"
#include "midsg/errors.hpp"
#include "test_util.hpp"

using namespace midsg;
using midsg::testing::TempDir;
using nlohmann::json;

namespace {

json minimal() { return json{{"data_dir", "data"}, {"total_steps", 10}}; }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, FlagOverridesFile) {
  TempDir tmp;
  json j = minimal();
  j["batch_size"] = 32;
  midsg::testing::write_file(tmp / "c.json", j.dump());
  EXPECT_EQ(resolve_config(tmp / "c.json").batch_size, 32);
  EXPECT_EQ(resolve_config(tmp / "c.json", {{"batch_size", "16"}}).batch_size, 16);
}

TEST(Config, MissingRequiredKeyNamed) {
  json j{{"data_dir", "data"}};
  EXPECT_NE(error_of([&] { config_from_json(j); }).find("total_steps"), std::string::npos);
}

TEST(Config, UnknownKeyNamed) {
  json j = minimal();
  j["batch_sise"] = 4;
  EXPECT_NE(error_of([&] { config_from_json(j); }).find("batch_sise"), std::string::npos);
}

TEST(Config, TypeMismatch) {
  json j = minimal();
  j["batch_size"] = "large";
  EXPECT_NE(error_of([&] { config_from_json(j); }).find("batch_size"), std::string::npos);
  j = minimal();
  j["path_reg"] = 1;
  EXPECT_THROW(config_from_json(j), ValidationError);
}

TEST(Config, RoundTrip) {
  json j = minimal();
  j["lambda_recon"] = 2.5;
  j["phi_channels"] = {8, 16, 32};
  j["pi_kind"] = "priority";
  TrainConfig a = config_from_json(j);
  TrainConfig b = config_from_json(to_json(a));
  EXPECT_TRUE(a == b);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(b.network.phi_channels, (std::vector<int>{8, 16, 32}));
  EXPECT_EQ(b.diffusion.pi_kind, TimestepKind::priority);
}

TEST(Config, RunRecordWrapperAccepted) {
  TrainConfig a = config_from_json(minimal());
  json wrapped{{"config", to_json(a)}, {"code_version", "x"}, {"seed", 0}};
  EXPECT_TRUE(config_from_json(wrapped) == a);
}

TEST(Config, MissingFileNamed) {
  EXPECT_NE(error_of([] { resolve_config("no/such/config.json"); }).find("no/such/config.json"), std::string::npos);
}

TEST(Config, MalformedFile) {
  TempDir tmp;
  midsg::testing::write_file(tmp / "c.json", "{ not json");
  EXPECT_THROW(resolve_config(tmp / "c.json"), ValidationError);
}

TEST(Config, OverrideParsing) {
  json j = minimal();
  apply_override(j, "path_reg", "false");
  apply_override(j, "lr_g", "1e-3");
  apply_override(j, "phi_channels", "4,8,16");
  apply_override(j, "pi_kind", "priority");
  TrainConfig c = config_from_json(j);
  EXPECT_FALSE(c.path_reg);
  EXPECT_DOUBLE_EQ(c.lr_g, 1e-3);
  EXPECT_EQ(c.network.phi_channels, (std::vector<int>{4, 8, 16}));
  EXPECT_THROW(apply_override(j, "batch_size", "many"), ValidationError);
  EXPECT_THROW(apply_override(j, "no_such_key", "1"), ValidationError);
}

TEST(Config, SemanticValidation) {
  json j = minimal();
  j["t_min"] = 80;
  EXPECT_THROW(config_from_json(j).validate(), ValidationError);
  j = minimal();
  j["split_fraction"] = 1.5;
  EXPECT_THROW(config_from_json(j).validate(), ValidationError);
  j = minimal();
  j["lambda_adv"] = -1;
  EXPECT_THROW(config_from_json(j).validate(), ValidationError);
}

TEST(Config, HelpListsEveryKey) {
  const std::string help = config_help();
  for (const auto& k : config_keys()) EXPECT_NE(help.find(k.name), std::string::npos) << k.name;
  EXPECT_GE(config_keys().size(), 40u);
}
