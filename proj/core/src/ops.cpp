#include "midsg/ops.hpp"

#include <algorithm>
#include <cmath>

#include "op_util.hpp"

namespace midsg::ag {

using detail::grad_of;
using detail::make_result;
using detail::require;
using detail::value_of;

namespace {

// Elementwise unary op with derivative expressed through input and output.
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  const auto& x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(a.shape(), std::move(y), {a}, [df](Node& out) {
    auto* ga = grad_of(out, 0);
    if (!ga) return;
    const auto& x = value_of(out, 0);
    for (std::size_t i = 0; i < x.size(); ++i)
      (*ga)[i] += out.grad[i] * df(x[i], out.value[i]);
  });
}

int batch_of(const Tensor& a, const char* op) {
  require(a.rank() >= 1, std::string(op) + ": scalar input");
  return a.dim(0);
}

// Channels and spatial extent for [B,C] or [B,C,H,W].
std::pair<int, int> channels_and_plane(const Tensor& x, const char* op) {
  require(x.rank() == 2 || x.rank() == 4,
          std::string(op) + ": expected [B,C] or [B,C,H,W], got " + to_string(x.shape()));
  int plane = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  return {x.dim(1), plane};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = grad_of(out, k))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i];
    if (auto* g = grad_of(out, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= out.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(y), {a, b}, [](Node& out) {
    const auto& av = value_of(out, 0);
    const auto& bv = value_of(out, 1);
    if (auto* g = grad_of(out, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i] * bv[i];
    if (auto* g = grad_of(out, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double k) {
  return unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

Tensor add_scalar(const Tensor& a, double k) {
  return unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s}, {a}, [](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (double& gi : *g) gi += out.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor sum_per_sample(const Tensor& a) {
  int batch = batch_of(a, "sum_per_sample");
  std::size_t per = a.numel() / static_cast<std::size_t>(batch);
  std::vector<double> y(static_cast<std::size_t>(batch), 0.0);
  for (std::size_t b = 0; b < y.size(); ++b)
    for (std::size_t i = 0; i < per; ++i) y[b] += a.at(b * per + i);
  return make_result({batch}, std::move(y), {a}, [per](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t b = 0; b < out.grad.size(); ++b)
        for (std::size_t i = 0; i < per; ++i) (*g)[b * per + i] += out.grad[b];
  });
}

Tensor mean_per_sample(const Tensor& a) {
  int batch = batch_of(a, "mean_per_sample");
  return scale(sum_per_sample(a), static_cast<double>(batch) / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(numel(shape) == a.numel(),
          "reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  std::vector<double> y(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(y), {a}, [](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i];
  });
}

Tensor flatten(const Tensor& a) {
  int batch = batch_of(a, "flatten");
  return reshape(a, {batch, static_cast<int>(a.numel() / static_cast<std::size_t>(batch))});
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "concat_features");
  detail::require_rank(b, 2, "concat_features");
  require(a.dim(0) == b.dim(0), "concat_features: batch mismatch");
  const int batch = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> y(static_cast<std::size_t>(batch) * (p + q));
  for (int i = 0; i < batch; ++i) {
    std::copy_n(a.values().begin() + i * p, p, y.begin() + i * (p + q));
    std::copy_n(b.values().begin() + i * q, q, y.begin() + i * (p + q) + p);
  }
  return make_result({batch, p + q}, std::move(y), {a, b}, [batch, p, q](Node& out) {
    auto* ga = grad_of(out, 0);
    auto* gb = grad_of(out, 1);
    for (int i = 0; i < batch; ++i) {
      const double* row = out.grad.data() + i * (p + q);
      if (ga)
        for (int j = 0; j < p; ++j) (*ga)[i * p + j] += row[j];
      if (gb)
        for (int j = 0; j < q; ++j) (*gb)[i * q + j] += row[p + j];
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const int> rows) {
  int batch = batch_of(a, "gather_rows");
  std::size_t per = a.numel() / static_cast<std::size_t>(batch);
  Shape shape = a.shape();
  shape[0] = static_cast<int>(rows.size());
  std::vector<int> idx(rows.begin(), rows.end());
  std::vector<double> y(rows.size() * per);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < batch, "gather_rows: row index out of range");
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(idx[r] * per), per,
                y.begin() + static_cast<std::ptrdiff_t>(r * per));
  }
  return make_result(std::move(shape), std::move(y), {a}, [idx, per](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t i = 0; i < per; ++i)
          (*g)[static_cast<std::size_t>(idx[r]) * per + i] += out.grad[r * per + i];
  });
}

Tensor tile_spatial(const Tensor& v, int height, int width) {
  detail::require_rank(v, 2, "tile_spatial");
  const int batch = v.dim(0), ch = v.dim(1);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<double> y(static_cast<std::size_t>(batch) * ch * plane);
  for (std::size_t bc = 0; bc < static_cast<std::size_t>(batch) * ch; ++bc)
    std::fill_n(y.begin() + static_cast<std::ptrdiff_t>(bc * plane), plane, v.at(bc));
  return make_result({batch, ch, height, width}, std::move(y), {v}, [plane](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t bc = 0; bc < g->size(); ++bc) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += out.grad[bc * plane + i];
        (*g)[bc] += s;
      }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  auto [ch, plane] = channels_and_plane(x, "add_bias");
  require(bias.numel() == static_cast<std::size_t>(ch), "add_bias: bias size mismatch");
  const std::size_t groups = x.numel() / (static_cast<std::size_t>(ch) * plane);
  std::vector<double> y(x.values().begin(), x.values().end());
  for (std::size_t b = 0; b < groups; ++b)
    for (int c = 0; c < ch; ++c) {
      double* p = y.data() + (b * ch + c) * plane;
      for (int i = 0; i < plane; ++i) p[i] += bias.at(c);
    }
  return make_result(x.shape(), std::move(y), {x, bias}, [ch, plane, groups](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i];
    if (auto* g = grad_of(out, 1))
      for (std::size_t b = 0; b < groups; ++b)
        for (int c = 0; c < ch; ++c) {
          const double* p = out.grad.data() + (b * ch + c) * plane;
          double s = 0.0;
          for (int i = 0; i < plane; ++i) s += p[i];
          (*g)[c] += s;
        }
  });
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
  auto [ch, plane] = channels_and_plane(x, "scale_channels");
  require(s.shape() == Shape{x.dim(0), ch},
          "scale_channels: styles " + to_string(s.shape()) + " do not match " +
              to_string(x.shape()));
  std::vector<double> y(x.numel());
  const std::size_t bc_count = s.numel();
  for (std::size_t bc = 0; bc < bc_count; ++bc)
    for (int i = 0; i < plane; ++i) y[bc * plane + i] = x.at(bc * plane + i) * s.at(bc);
  return make_result(x.shape(), std::move(y), {x, s}, [plane, bc_count](Node& out) {
    const auto& xv = value_of(out, 0);
    const auto& sv = value_of(out, 1);
    auto* gx = grad_of(out, 0);
    auto* gs = grad_of(out, 1);
    for (std::size_t bc = 0; bc < bc_count; ++bc) {
      double acc = 0.0;
      for (int i = 0; i < plane; ++i) {
        std::size_t k = bc * plane + i;
        if (gx) (*gx)[k] += out.grad[k] * sv[bc];
        acc += out.grad[k] * xv[k];
      }
      if (gs) (*gs)[bc] += acc;
    }
  });
}

Tensor add_channels(const Tensor& x, const Tensor& v) {
  auto [ch, plane] = channels_and_plane(x, "add_channels");
  require(v.shape() == Shape{x.dim(0), ch}, "add_channels: shape mismatch");
  std::vector<double> y(x.values().begin(), x.values().end());
  const std::size_t bc_count = v.numel();
  for (std::size_t bc = 0; bc < bc_count; ++bc)
    for (int i = 0; i < plane; ++i) y[bc * plane + i] += v.at(bc);
  return make_result(x.shape(), std::move(y), {x, v}, [plane, bc_count](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += out.grad[i];
    if (auto* g = grad_of(out, 1))
      for (std::size_t bc = 0; bc < bc_count; ++bc) {
        double s = 0.0;
        for (int i = 0; i < plane; ++i) s += out.grad[bc * plane + i];
        (*g)[bc] += s;
      }
  });
}

Tensor scale_samples(const Tensor& x, std::span<const double> coeffs) {
  int batch = batch_of(x, "scale_samples");
  require(coeffs.size() == static_cast<std::size_t>(batch), "scale_samples: coefficient count");
  std::size_t per = x.numel() / static_cast<std::size_t>(batch);
  std::vector<double> k(coeffs.begin(), coeffs.end());
  std::vector<double> y(x.numel());
  for (std::size_t b = 0; b < k.size(); ++b)
    for (std::size_t i = 0; i < per; ++i) y[b * per + i] = k[b] * x.at(b * per + i);
  return make_result(x.shape(), std::move(y), {x}, [k, per](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t b = 0; b < k.size(); ++b)
        for (std::size_t i = 0; i < per; ++i) (*g)[b * per + i] += k[b] * out.grad[b * per + i];
  });
}

Tensor embedding(const Tensor& table, std::span<const int> indices) {
  detail::require_rank(table, 2, "embedding");
  for (int i : indices)
    require(i >= 0 && i < table.dim(0), "embedding: index " + std::to_string(i) +
                                            " out of range [0," + std::to_string(table.dim(0)) + ")");
  return gather_rows(table, indices);
}

Tensor upsample2x(const Tensor& x) {
  detail::require_rank(x, 4, "upsample2x");
  const int bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<double> y(static_cast<std::size_t>(bc) * 4 * h * w);
  for (int p = 0; p < bc; ++p)
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j)
        y[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j] =
            x.at((static_cast<std::size_t>(p) * h + i / 2) * w + j / 2);
  return make_result({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(y), {x},
                     [bc, h, w](Node& out) {
                       auto* g = grad_of(out, 0);
                       if (!g) return;
                       for (int p = 0; p < bc; ++p)
                         for (int i = 0; i < 2 * h; ++i)
                           for (int j = 0; j < 2 * w; ++j)
                             (*g)[(static_cast<std::size_t>(p) * h + i / 2) * w + j / 2] +=
                                 out.grad[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j];
                     });
}

Tensor avg_pool2x(const Tensor& x) {
  detail::require_rank(x, 4, "avg_pool2x");
  const int bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2x: odd spatial size");
  const int ho = h / 2, wo = w / 2;
  std::vector<double> y(static_cast<std::size_t>(bc) * ho * wo, 0.0);
  for (int p = 0; p < bc; ++p)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        y[(static_cast<std::size_t>(p) * ho + i / 2) * wo + j / 2] +=
            0.25 * x.at((static_cast<std::size_t>(p) * h + i) * w + j);
  return make_result({x.dim(0), x.dim(1), ho, wo}, std::move(y), {x},
                     [bc, h, w, ho, wo](Node& out) {
                       auto* g = grad_of(out, 0);
                       if (!g) return;
                       for (int p = 0; p < bc; ++p)
                         for (int i = 0; i < h; ++i)
                           for (int j = 0; j < w; ++j)
                             (*g)[(static_cast<std::size_t>(p) * h + i) * w + j] +=
                                 0.25 * out.grad[(static_cast<std::size_t>(p) * ho + i / 2) * wo + j / 2];
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  detail::require_rank(x, 4, "global_avg_pool");
  const int batch = x.dim(0), ch = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  std::vector<double> y(static_cast<std::size_t>(batch) * ch, 0.0);
  for (std::size_t bc = 0; bc < y.size(); ++bc) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x.at(bc * plane + i);
    y[bc] = s / static_cast<double>(plane);
  }
  return make_result({batch, ch}, std::move(y), {x}, [plane](Node& out) {
    if (auto* g = grad_of(out, 0))
      for (std::size_t bc = 0; bc < out.grad.size(); ++bc)
        for (std::size_t i = 0; i < plane; ++i)
          (*g)[bc * plane + i] += out.grad[bc] / static_cast<double>(plane);
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mse");
  return mean(square(sub(a, b)));
}

Tensor softmax_nll(const Tensor& logits, std::span<const int> labels) {
  detail::require_rank(logits, 2, "softmax_nll");
  const int batch = logits.dim(0), k = logits.dim(1);
  require(labels.size() == static_cast<std::size_t>(batch), "softmax_nll: label count");
  std::vector<int> lab(labels.begin(), labels.end());
  std::vector<double> prob(logits.numel());
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    require(lab[i] >= 0 && lab[i] < k, "softmax_nll: label out of range");
    const double* row = logits.values().data() + i * k;
    double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    double lse = mx + std::log(z);
    for (int j = 0; j < k; ++j) prob[i * k + j] = std::exp(row[j] - lse);
    loss += lse - row[lab[i]];
  }
  loss /= batch;
  return make_result({}, {loss}, {logits}, [prob, lab, batch, k](Node& out) {
    auto* g = grad_of(out, 0);
    if (!g) return;
    const double scale = out.grad[0] / batch;
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < k; ++j)
        (*g)[i * k + j] += scale * (prob[i * k + j] - (j == lab[i] ? 1.0 : 0.0));
  });
}

}  // namespace midsg::ag
