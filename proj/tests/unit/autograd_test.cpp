#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "midsg/errors.hpp"
#include "midsg/ops.hpp"
#include "midsg/optim.hpp"

using namespace midsg;
using ag::Tensor;

namespace {

Tensor param(ag::Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(ag::numel(shape));
  fill_normal(rng, v, scale);
  return Tensor::parameter(std::move(shape), std::move(v));
}

void expect_grad_ok(const NamedParams& params, const std::function<Tensor()>& fn, int samples = 30) {
  auto r = midsg::testing::check_gradients(params, fn, samples, 1);
  EXPECT_GT(r.checked, 0);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

}  // namespace

TEST(Autograd, ElementwiseChain) {
  Tensor a = param({3, 4}, 1), b = param({3, 4}, 2);
  expect_grad_ok({{"a", a}, {"b", b}}, [&] {
    Tensor x = ag::add(ag::mul(ag::tanh(a), ag::sigmoid(b)), ag::softplus(ag::scale(a, 0.7)));
    return ag::mean(ag::add(ag::square(x), ag::sqrt(ag::add_scalar(ag::square(b), 1.0))));
  });
}

TEST(Autograd, LeakyReluAwayFromKink) {
  Tensor a = param({10}, 3);
  expect_grad_ok({{"a", a}}, [&] { return ag::sum(ag::square(ag::leaky_relu(a))); });
}

TEST(Autograd, LinearAndEmbedding) {
  Tensor x = param({4, 5}, 4), w = param({3, 5}, 5), b = param({3}, 6), table = param({6, 5}, 7);
  const std::vector<int> idx{0, 5, 2, 2};
  expect_grad_ok({{"x", x}, {"w", w}, {"b", b}, {"table", table}}, [&] {
    Tensor h = ag::add(x, ag::embedding(table, idx));
    return ag::mean(ag::square(ag::linear(h, w, b)));
  });
}

TEST(Autograd, ConvolutionStack) {
  Tensor x = param({2, 3, 6, 6}, 8), w1 = param({4, 3, 3, 3}, 9, 0.3), b1 = param({4}, 10),
         w2 = param({2, 4, 3, 3}, 11, 0.3);
  expect_grad_ok({{"x", x}, {"w1", w1}, {"b1", b1}, {"w2", w2}}, [&] {
    Tensor h = ag::conv2d(x, w1, b1, 1, 1);
    h = ag::avg_pool2x(ag::tanh(h));
    h = ag::conv2d(ag::upsample2x(h), w2, Tensor(), 2, 0);
    return ag::mean(ag::square(h));
  });
}

TEST(Autograd, ModulationOps) {
  Tensor x = param({2, 3, 4, 4}, 12), s = param({2, 3}, 13), v = param({2, 3}, 14), w = param({5, 3, 3, 3}, 15);
  expect_grad_ok({{"x", x}, {"s", s}, {"v", v}, {"w", w}}, [&] {
    Tensor h = ag::add_channels(ag::scale_channels(x, s), v);
    Tensor d = ag::demod_coeffs(w, s, 1e-8);
    return ag::add(ag::mean(ag::square(h)), ag::mean(d));
  });
}

TEST(Autograd, ReshapeGatherPool) {
  Tensor x = param({3, 2, 2, 2}, 16), z = param({3, 4}, 17);
  const std::vector<int> rows{2, 0, 0};
  expect_grad_ok({{"x", x}, {"z", z}}, [&] {
    Tensor g = ag::global_avg_pool(x);                      // [3,2]
    Tensor c = ag::concat_features(g, ag::gather_rows(z, rows));  // [3,6]
    Tensor t = ag::tile_spatial(c, 2, 2);
    return ag::add(ag::sum(ag::square(ag::flatten(t))), ag::mean(ag::mean_per_sample(ag::reshape(x, {3, 8}))));
  });
}

TEST(Autograd, SoftmaxNllAndMse) {
  Tensor logits = param({4, 3}, 18), a = param({4, 2}, 19), b = param({4, 2}, 20);
  const std::vector<int> labels{0, 2, 1, 2};
  expect_grad_ok({{"logits", logits}, {"a", a}, {"b", b}},
                 [&] { return ag::add(ag::softmax_nll(logits, labels), ag::mse(a, b)); });
}

TEST(Autograd, SharedSubexpressionAccumulates) {
  Tensor a = Tensor::parameter({1}, {3.0});
  Tensor y = ag::mul(a, a);
  ag::backward(ag::sum(ag::add(y, y)));
  EXPECT_DOUBLE_EQ(a.grad()[0], 12.0);
}

TEST(Autograd, NoGradGuardStopsRecording) {
  Tensor a = Tensor::parameter({2}, {1.0, 2.0});
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::grad_enabled());
    Tensor y = ag::square(a);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ag::grad_enabled());
  EXPECT_TRUE(ag::square(a).requires_grad());
}

TEST(Autograd, ShapeErrors) {
  EXPECT_THROW(ag::add(Tensor::zeros({2}), Tensor::zeros({3})), ValidationError);
  EXPECT_THROW(ag::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), Tensor(), 1, 1), ValidationError);
  EXPECT_THROW(ag::backward(Tensor::zeros({2})), ValidationError);
  EXPECT_THROW(Tensor::from({2, 2}, {1.0}), ValidationError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::parameter({2}, {1.0, -1.0});
  Adam opt({{"p", p}}, AdamConfig{0.1, 0.0, 0.99, 1e-8});
  opt.zero_grad();
  ag::backward(ag::sum(ag::mul(p, Tensor::from({2}, {3.0, -0.5}))));
  opt.step();
  EXPECT_NEAR(p.at(0), 0.9, 1e-6);
  EXPECT_NEAR(p.at(1), -0.9, 1e-6);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MomentsRoundTrip) {
  Tensor p = Tensor::parameter({3}, {1, 2, 3});
  Adam a({{"p", p}}, AdamConfig{});
  ag::backward(ag::sum(ag::square(p)));
  a.step();
  auto moments = a.export_moments("x.");
  Tensor q = Tensor::parameter({3}, {1, 2, 3});
  Adam b({{"p", q}}, AdamConfig{});
  b.import_moments(moments, "x.", a.steps());
  EXPECT_EQ(b.export_moments("x.").at("x.p.m"), moments.at("x.p.m"));
  EXPECT_EQ(b.steps(), 1);
}
