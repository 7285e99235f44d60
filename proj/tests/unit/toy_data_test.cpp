#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "domain_oracle.hpp"
#include "midsg/checkpoint.hpp"
#include "midsg/errors.hpp"
#include "midsg/image_io.hpp"
#include "midsg/toy_data.hpp"
#include "test_util.hpp"

using namespace midsg;
namespace fs = std::filesystem;
using midsg::testing::TempDir;

namespace {

std::vector<ToyDomain> two_domains() {
  return {{{0, "a"}, DomainEffect::none, 1.0}, {{1, "b"}, DomainEffect::ring_overlay, 1.0}};
}

}  // namespace

TEST(ToyData, WritesOneFilePerImageAndRecordsSeed) {
  TempDir tmp;
  ToyDomainSpec spec;
  spec.seed = 7;
  generate_toy_dataset(spec, 4, default_toy_domains(), tmp.path());
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path()))
    if (e.path().extension() == ".png") ++files;
  EXPECT_EQ(files, 12);
  auto manifest = nlohmann::json::parse(midsg::testing::read_file(tmp / "manifest.json"));
  EXPECT_EQ(manifest["seed"].get<int>(), 7);
}

TEST(ToyData, RegenerationIsByteIdentical) {
  TempDir a, b;
  ToyDomainSpec spec;
  spec.seed = 3;
  generate_toy_dataset(spec, 3, default_toy_domains(), a.path());
  generate_toy_dataset(spec, 3, default_toy_domains(), b.path());
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), a.path());
    EXPECT_EQ(file_hash(e.path()), file_hash(b.path() / rel)) << rel;
  }
}

TEST(ToyData, HalftoneOverlayChangesPixels) {
  ToyDomainSpec plain;
  plain.seed = 1;
  plain.domain_effect = DomainEffect::halftone_overlay;
  plain.effect_strength = 0.0;
  ToyDomainSpec printed = plain;
  printed.effect_strength = 0.8;
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < 10; ++i) {
    Image8 x = render_toy_image(plain, 0, i), y = render_toy_image(printed, 0, i);
    for (std::size_t p = 0; p < x.pixels.size(); ++p, ++count)
      total += std::abs(x.pixels[p] - y.pixels[p]) / 255.0;
  }
  EXPECT_GT(total / count, 0.05);
}

TEST(ToyData, InvalidSpecRejected) {
  TempDir tmp;
  ToyDomainSpec spec;
  spec.pupil_radius_range = {0.3, 0.1};
  EXPECT_THROW(generate_toy_dataset(spec, 2, default_toy_domains(), tmp.path()), ValidationError);
  EXPECT_THROW(generate_toy_dataset(ToyDomainSpec{}, 0, default_toy_domains(), tmp.path()), ValidationError);
}

TEST(ToyData, UnwritableRootIsIoError) {
  TempDir tmp;
  midsg::testing::write_file(tmp / "file", "x");
  EXPECT_THROW(generate_toy_dataset(ToyDomainSpec{}, 1, default_toy_domains(), tmp / "file" / "sub"), IoError);
}

TEST(Split, SeventyThirtyPerDomain) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 10, default_toy_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  ASSERT_EQ(s.domains.size(), 3u);
  for (int d = 0; d < 3; ++d) {
    EXPECT_EQ(std::count_if(s.train.begin(), s.train.end(), [&](const Sample& x) { return x.label.index == d; }), 7);
    EXPECT_EQ(std::count_if(s.test.begin(), s.test.end(), [&](const Sample& x) { return x.label.index == d; }), 3);
  }
}

TEST(Split, ThreeImagesGiveTwoTrainOneTest) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 3, two_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  EXPECT_EQ(s.train.size(), 4u);
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, DeterministicUnderSeed) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 10, two_domains(), tmp.path());
  auto names = [](const std::vector<Sample>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.path.string());
    return out;
  };
  EXPECT_EQ(names(split_dataset(tmp.path(), 0.7, 4).train), names(split_dataset(tmp.path(), 0.7, 4).train));
  EXPECT_NE(names(split_dataset(tmp.path(), 0.7, 4).train), names(split_dataset(tmp.path(), 0.7, 5).train));
}

TEST(Split, EmptyDomainRejected) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 3, two_domains(), tmp.path());
  for (const auto& e : fs::directory_iterator(tmp / "b")) fs::remove(e.path());
  EXPECT_THROW(split_dataset(tmp.path(), 0.7, 0), ValidationError);
}

TEST(Batches, ShapesAndLabels) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 10, default_toy_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  ASSERT_EQ(s.train.size(), 21u);
  BatchIterator it(s.train, 0);
  ImageBatch b = it.next(8);
  EXPECT_EQ(b.data.shape(), (ag::Shape{8, 1, 32, 32}));
  EXPECT_EQ(b.labels.size(), 8u);
  for (double v : b.data.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Batches, EpochCoversEveryImageOnce) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 10, default_toy_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  BatchIterator it(s.train, 9);
  std::multiset<int> seen;
  for (int i = 0; i < 3; ++i) {  // ceil(21 / 8)
    it.next(i < 2 ? 8 : 5);
    seen.insert(it.last_indices().begin(), it.last_indices().end());
  }
  EXPECT_EQ(seen.size(), 21u);
  EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), 21u);
}

TEST(Batches, PixelEndpointsMapToUnitRange) {
  Image8 img{2, 1, 1, {0, 255}};
  auto v = to_planar_unit(img);
  EXPECT_EQ(v[0], -1.0);
  EXPECT_EQ(v[1], 1.0);
}

TEST(Batches, UndecodableFileNamed) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 3, two_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  midsg::testing::write_file(s.train[0].path, "not a png");
  try {
    load_batch(std::span<const Sample>(s.train.data(), 1));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(s.train[0].path.filename().string()), std::string::npos);
  }
}

TEST(Batches, IteratorStateRoundTrips) {
  TempDir tmp;
  generate_toy_dataset(ToyDomainSpec{}, 5, two_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  BatchIterator a(s.train, 2);
  a.next(3);
  BatchIterator b(s.train, 99);
  b.restore_state(a.save_state());
  for (int i = 0; i < 4; ++i) {
    a.next(3);
    b.next(3);
    EXPECT_EQ(a.last_indices(), b.last_indices());
  }
}

TEST(ToyData, DomainsSeparableByPixelStatistics) {
  TempDir tmp;
  ToyDomainSpec spec;
  spec.seed = 21;
  generate_toy_dataset(spec, 60, default_toy_domains(), tmp.path());
  DatasetSplit s = split_dataset(tmp.path(), 0.7, 0);
  ImageBatch train = load_batch(s.train), test = load_batch(s.test);
  midsg::testing::DomainOracle oracle;
  oracle.fit(train.data, train.labels, 3);
  EXPECT_GE(oracle.accuracy(test.data, test.labels), 0.95);
}
