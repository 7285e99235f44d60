#pragma once

// Differentiable tensor operations. Image tensors use NCHW layout; feature
// tensors are [B, F]. All functions validate shapes and throw
// midsg::ValidationError on mismatch.

#include <span>
#include <vector>

#include "midsg/autograd.hpp"

namespace midsg::ag {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_per_sample(const Tensor& a);   // [B, ...] -> [B]
Tensor mean_per_sample(const Tensor& a);  // [B, ...] -> [B]

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);                        // [B, ...] -> [B, F]
Tensor concat_features(const Tensor& a, const Tensor& b);  // dim 1
Tensor gather_rows(const Tensor& a, std::span<const int> rows);
Tensor tile_spatial(const Tensor& v, int height, int width);  // [B,C]->[B,C,H,W]

// Broadcast helpers for NCHW (or [B,C]) tensors.
Tensor add_bias(const Tensor& x, const Tensor& bias);        // bias [C]
Tensor scale_channels(const Tensor& x, const Tensor& s);     // s [B,C]
Tensor add_channels(const Tensor& x, const Tensor& v);       // v [B,C]
// Per-sample constant scaling y_b = a_b * x_b.
Tensor scale_samples(const Tensor& x, std::span<const double> coeffs);

// Dense layers.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor embedding(const Tensor& table, std::span<const int> indices);
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);
// Style demodulation factors 1/sqrt(sum_{i,k} (w_oik * s_bi)^2 + eps), [B,O].
Tensor demod_coeffs(const Tensor& weight, const Tensor& styles, double eps);

// Resampling.
Tensor upsample2x(const Tensor& x);
Tensor avg_pool2x(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);  // [B,C,H,W] -> [B,C]

// Losses returning scalars.
Tensor mse(const Tensor& a, const Tensor& b);
// Mean over rows of -log softmax(logits)[label].
Tensor softmax_nll(const Tensor& logits, std::span<const int> labels);

}  // namespace midsg::ag
