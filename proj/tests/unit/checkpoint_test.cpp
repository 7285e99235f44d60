#include <gtest/gtest.h>

#include "midsg/checkpoint.hpp"
#include "midsg/errors.hpp"
#include "midsg/networks.hpp"
#include "test_util.hpp"

using namespace midsg;
using midsg::testing::TempDir;

TEST(Archive, RoundTripPreservesBits) {
  TempDir tmp;
  Archive a;
  a.meta = {{"kind", "test"}, {"n", 3}};
  a.put("x", {2, 2}, {1.0, -0.0, 1e-300, 3.141592653589793});
  a.put("empty", {0}, {});
  write_archive(tmp / "a.ckpt", a);
  Archive b = read_archive(tmp / "a.ckpt");
  EXPECT_EQ(b.meta, a.meta);
  EXPECT_EQ(b.get("x").shape, (ag::Shape{2, 2}));
  EXPECT_EQ(b.get("x").values, a.get("x").values);
  EXPECT_TRUE(std::signbit(b.get("x").values[1]));
  EXPECT_TRUE(b.get("empty").values.empty());
  EXPECT_THROW(b.get("missing"), ValidationError);
  EXPECT_FALSE(std::filesystem::exists(tmp / "a.ckpt.tmp"));
}

TEST(Archive, ShapeMismatchOnPut) {
  Archive a;
  EXPECT_THROW(a.put("x", {3}, {1.0, 2.0}), ValidationError);
}

TEST(Archive, CorruptFilesRejected) {
  TempDir tmp;
  midsg::testing::write_file(tmp / "bad.ckpt", "NOTACKPT and more");
  EXPECT_ANY_THROW(read_archive(tmp / "bad.ckpt"));
  Archive a;
  a.put("x", {4}, {1, 2, 3, 4});
  write_archive(tmp / "ok.ckpt", a);
  std::string bytes = midsg::testing::read_file(tmp / "ok.ckpt");
  midsg::testing::write_file(tmp / "short.ckpt", bytes.substr(0, bytes.size() - 5));
  EXPECT_ANY_THROW(read_archive(tmp / "short.ckpt"));
  EXPECT_THROW(read_archive(tmp / "absent.ckpt"), IoError);
}

TEST(Archive, FileHashStable) {
  TempDir tmp;
  Archive a;
  a.put("x", {1}, {1.0});
  write_archive(tmp / "a.ckpt", a);
  write_archive(tmp / "b.ckpt", a);
  EXPECT_EQ(file_hash(tmp / "a.ckpt"), file_hash(tmp / "b.ckpt"));
  EXPECT_EQ(file_hash(tmp / "a.ckpt").size(), 16u);
}

TEST(Archive, ParamsRoundTrip) {
  TempDir tmp;
  NetworkConfig c;
  ModelBundle a = init_bundle(c, 1), b = init_bundle(c, 2);
  Archive ar;
  store_params(ar, a.all_parameters());
  write_archive(tmp / "p.ckpt", ar);
  load_params(read_archive(tmp / "p.ckpt"), b.all_parameters());
  EXPECT_EQ(checksum(a.all_parameters()), checksum(b.all_parameters()));
}

TEST(Archive, ParamsShapeMismatch) {
  NetworkConfig small, big;
  big.latent_dim = 64;
  ModelBundle a = init_bundle(small, 1), b = init_bundle(big, 1);
  Archive ar;
  store_params(ar, a.all_parameters());
  EXPECT_THROW(load_params(ar, b.all_parameters()), ValidationError);
}
