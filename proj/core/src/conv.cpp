// Dense and convolutional layers on top of Eigen GEMM.

// Blocked GEMM at every size keeps results independent of buffer alignment.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Dense>
#include <cmath>

#include "midsg/ops.hpp"
#include "op_util.hpp"

namespace midsg::ag {

using detail::grad_of;
using detail::make_result;
using detail::require;
using detail::value_of;

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

struct ConvGeometry {
  int cin, h, w, k, stride, pad, ho, wo;
  int patch() const { return cin * k * k; }
  int out_plane() const { return ho * wo; }
};

// cols is [cin*k*k, ho*wo] row-major.
void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const int plane = g.out_plane();
  for (int c = 0; c < g.cin; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = cols + static_cast<std::ptrdiff_t>((c * g.k + ki) * g.k + kj) * plane;
        const double* xc = x + static_cast<std::ptrdiff_t>(c) * g.h * g.w;
        for (int oi = 0; oi < g.ho; ++oi) {
          const int i = oi * g.stride - g.pad + ki;
          double* dst = row + oi * g.wo;
          if (i < 0 || i >= g.h) {
            std::fill_n(dst, g.wo, 0.0);
            continue;
          }
          const double* src = xc + i * g.w;
          for (int oj = 0; oj < g.wo; ++oj) {
            const int j = oj * g.stride - g.pad + kj;
            dst[oj] = (j >= 0 && j < g.w) ? src[j] : 0.0;
          }
        }
      }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
  const int plane = g.out_plane();
  for (int c = 0; c < g.cin; ++c)
    for (int ki = 0; ki < g.k; ++ki)
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols + static_cast<std::ptrdiff_t>((c * g.k + ki) * g.k + kj) * plane;
        double* xc = dx + static_cast<std::ptrdiff_t>(c) * g.h * g.w;
        for (int oi = 0; oi < g.ho; ++oi) {
          const int i = oi * g.stride - g.pad + ki;
          if (i < 0 || i >= g.h) continue;
          const double* src = row + oi * g.wo;
          double* dst = xc + i * g.w;
          for (int oj = 0; oj < g.wo; ++oj) {
            const int j = oj * g.stride - g.pad + kj;
            if (j >= 0 && j < g.w) dst[j] += src[oj];
          }
        }
      }
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  detail::require_rank(x, 2, "linear");
  detail::require_rank(weight, 2, "linear");
  const int batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  require(weight.dim(1) == in, "linear: input width " + std::to_string(in) +
                                   " does not match weight " + to_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == static_cast<std::size_t>(out_dim), "linear: bias size");

  std::vector<double> y(static_cast<std::size_t>(batch) * out_dim);
  MapR Y(y.data(), batch, out_dim);
  CMapR X(x.values().data(), batch, in);
  CMapR W(weight.values().data(), out_dim, in);
  Y.noalias() = X * W.transpose();
  if (has_bias)
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), out_dim);

  return make_result({batch, out_dim}, std::move(y), {x, weight, bias},
                     [batch, in, out_dim](Node& out) {
                       CMapR dY(out.grad.data(), batch, out_dim);
                       if (auto* g = grad_of(out, 0)) {
                         CMapR W(value_of(out, 1).data(), out_dim, in);
                         MapR(g->data(), batch, in).noalias() += dY * W;
                       }
                       if (auto* g = grad_of(out, 1)) {
                         CMapR X(value_of(out, 0).data(), batch, in);
                         MapR(g->data(), out_dim, in).noalias() += dY.transpose() * X;
                       }
                       if (auto* g = grad_of(out, 2))
                         for (int b = 0; b < batch; ++b)
                           for (int o = 0; o < out_dim; ++o) (*g)[o] += dY(b, o);
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  detail::require_rank(x, 4, "conv2d");
  detail::require_rank(weight, 4, "conv2d");
  require(weight.dim(2) == weight.dim(3), "conv2d: non-square kernel");
  require(weight.dim(1) == x.dim(1), "conv2d: input has " + std::to_string(x.dim(1)) +
                                         " channels, weight expects " +
                                         std::to_string(weight.dim(1)));
  require(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
  ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), weight.dim(2), stride, padding, 0, 0};
  g.ho = (g.h + 2 * padding - g.k) / stride + 1;
  g.wo = (g.w + 2 * padding - g.k) / stride + 1;
  require(g.ho > 0 && g.wo > 0, "conv2d: empty output");
  const int batch = x.dim(0), cout = weight.dim(0);
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == static_cast<std::size_t>(cout), "conv2d: bias size");

  const std::size_t in_per = static_cast<std::size_t>(g.cin) * g.h * g.w;
  const std::size_t out_per = static_cast<std::size_t>(cout) * g.out_plane();
  std::vector<double> y(batch * out_per);
  std::vector<double> cols(static_cast<std::size_t>(g.patch()) * g.out_plane());
  CMapR W(weight.values().data(), cout, g.patch());
  for (int b = 0; b < batch; ++b) {
    im2col(x.values().data() + b * in_per, g, cols.data());
    MapR Y(y.data() + b * out_per, cout, g.out_plane());
    Y.noalias() = W * CMapR(cols.data(), g.patch(), g.out_plane());
    if (has_bias)
      Y.colwise() += Eigen::Map<const Eigen::VectorXd>(bias.values().data(), cout);
  }

  return make_result(
      {batch, cout, g.ho, g.wo}, std::move(y), {x, weight, bias},
      [g, batch, cout, in_per, out_per](Node& out) {
        auto* gx = grad_of(out, 0);
        auto* gw = grad_of(out, 1);
        auto* gb = grad_of(out, 2);
        const auto& xv = value_of(out, 0);
        CMapR W(value_of(out, 1).data(), cout, g.patch());
        std::vector<double> cols(static_cast<std::size_t>(g.patch()) * g.out_plane());
        for (int b = 0; b < batch; ++b) {
          CMapR dY(out.grad.data() + b * out_per, cout, g.out_plane());
          if (gw) {
            im2col(xv.data() + b * in_per, g, cols.data());
            MapR(gw->data(), cout, g.patch()).noalias() +=
                dY * CMapR(cols.data(), g.patch(), g.out_plane()).transpose();
          }
          if (gb)
            for (int o = 0; o < cout; ++o) {
              double acc = 0.0;
              for (int k = 0; k < g.out_plane(); ++k) acc += dY(o, k);
              (*gb)[o] += acc;
            }
          if (gx) {
            MapR(cols.data(), g.patch(), g.out_plane()).noalias() = W.transpose() * dY;
            col2im_add(cols.data(), g, gx->data() + b * in_per);
          }
        }
      });
}

Tensor demod_coeffs(const Tensor& weight, const Tensor& styles, double eps) {
  detail::require_rank(weight, 4, "demod_coeffs");
  detail::require_rank(styles, 2, "demod_coeffs");
  const int cout = weight.dim(0), cin = weight.dim(1);
  const int taps = weight.dim(2) * weight.dim(3);
  const int batch = styles.dim(0);
  require(styles.dim(1) == cin, "demod_coeffs: style width does not match input channels");

  // q[o,i] = sum_k w[o,i,k]^2
  MatR q(cout, cin);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < cin; ++i) {
      double s = 0.0;
      for (int k = 0; k < taps; ++k) {
        double w = weight.at((static_cast<std::size_t>(o) * cin + i) * taps + k);
        s += w * w;
      }
      q(o, i) = s;
    }
  CMapR S(styles.values().data(), batch, cin);
  MatR s2 = S.array().square().matrix();
  std::vector<double> d(static_cast<std::size_t>(batch) * cout);
  MapR D(d.data(), batch, cout);
  D.noalias() = s2 * q.transpose();
  for (double& v : d) v = 1.0 / std::sqrt(v + eps);

  return make_result({batch, cout}, std::move(d), {weight, styles},
                     [q, s2, cout, cin, taps, batch](Node& out) {
                       CMapR D(out.value.data(), batch, cout);
                       CMapR G(out.grad.data(), batch, cout);
                       // c[b,o] = -g * d^3
                       MatR c = -(G.array() * D.array().cube()).matrix();
                       if (auto* gs = grad_of(out, 1)) {
                         CMapR S(value_of(out, 1).data(), batch, cin);
                         MatR t = c * q;  // [B, I]
                         MapR(gs->data(), batch, cin) += (t.array() * S.array()).matrix();
                       }
                       if (auto* gw = grad_of(out, 0)) {
                         MatR coef = c.transpose() * s2;  // [O, I]
                         const auto& wv = value_of(out, 0);
                         for (int o = 0; o < cout; ++o)
                           for (int i = 0; i < cin; ++i)
                             for (int k = 0; k < taps; ++k) {
                               std::size_t idx = (static_cast<std::size_t>(o) * cin + i) * taps + k;
                               (*gw)[idx] += coef(o, i) * wv[idx];
                             }
                       }
                     });
}

}  // namespace midsg::ag
