#include <gtest/gtest.h>

#include <cmath>

#include "midsg/errors.hpp"
#include "midsg/rng.hpp"
#include "midsg/roc.hpp"
#include "roc_oracle.hpp"

using namespace midsg;

TEST(Tdr, PerfectSeparation) {
  ScoreSet s{{0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}};
  EXPECT_EQ(tdr_at_fdr(s, std::vector<double>{0.01}), std::vector<double>{1.0});
}

TEST(Tdr, ExchangeableBound) {
  Rng rng(3);
  std::vector<double> v(200);
  fill_normal(rng, v);
  ScoreSet s{v, v};
  EXPECT_LE(tdr_at_fdr(s, std::vector<double>{0.05})[0], 0.05 + 1.0 / 200);
}

TEST(Tdr, MatchesBruteForce) {
  Rng rng(5);
  ScoreSet s;
  for (int i = 0; i < 200; ++i) s.bonafide_scores.push_back(standard_normal(rng));
  for (int i = 0; i < 200; ++i) s.pa_scores.push_back(standard_normal(rng) + 0.8);
  const std::vector<double> f{0.0, 0.01, 0.02, 0.05, 0.3, 1.0};
  auto got = tdr_at_fdr(s, f);
  for (std::size_t k = 0; k < f.size(); ++k)
    EXPECT_EQ(got[k], midsg::testing::brute_force_tdr(s.bonafide_scores, s.pa_scores, f[k]));
}

TEST(Tdr, MonotoneInTarget) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    ScoreSet s;
    for (int i = 0; i < 50; ++i) s.bonafide_scores.push_back(uniform_int(rng, 0, 9));
    for (int i = 0; i < 70; ++i) s.pa_scores.push_back(uniform_int(rng, 3, 12));
    double prev = -1;
    for (double f = 0.0; f <= 1.0; f += 0.05) {
      const double v = tdr_at_fdr(s, std::vector<double>{f})[0];
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Tdr, DefaultTargets) {
  ScoreSet s{{0.0, 1.0}, {2.0}};
  EXPECT_EQ(tdr_at_fdr(s).size(), 3u);
}

TEST(Tdr, InvalidInputs) {
  EXPECT_THROW(tdr_at_fdr(ScoreSet{{}, {1.0}}), ValidationError);
  EXPECT_THROW(tdr_at_fdr(ScoreSet{{1.0}, {}}), ValidationError);
  EXPECT_THROW(tdr_at_fdr(ScoreSet{{std::nan("")}, {1.0}}), ValidationError);
  EXPECT_THROW(tdr_at_fdr(ScoreSet{{1.0}, {1.0}}, std::vector<double>{1.5}), ValidationError);
}

TEST(Roc, CurveEndpoints) {
  ScoreSet s{{0.1, 0.4}, {0.3, 0.9}};
  auto curve = roc_curve(s);
  ASSERT_FALSE(curve.empty());
  EXPECT_EQ(curve.front(), (std::pair<double, double>{0.0, 0.0}));
  EXPECT_EQ(curve.back(), (std::pair<double, double>{1.0, 1.0}));
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].first, curve[i - 1].first);
    EXPECT_GE(curve[i].second, curve[i - 1].second);
  }
}
