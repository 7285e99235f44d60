#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "midsg/networks.hpp"
#include "midsg/toy_data.hpp"

namespace midsg {

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // unbiased, symmetrized
  long n = 0;

  int dim() const { return static_cast<int>(mu.size()); }
};

// Moments of feature rows (n x d, row-major).
GaussianStats gaussian_stats(std::span<const double> features, int n, int d);

// Pooled phi features of every image, processed in chunks.
std::vector<double> embed_features(const FeatureExtractor& phi, const ag::Tensor& images,
                                   int chunk = 128);
GaussianStats embed(const FeatureExtractor& phi, const ag::Tensor& images);
GaussianStats embed(const FeatureExtractor& phi, std::span<const Sample> samples);

// |mu_r - mu_s|^2 + Tr(S_r + S_s - 2 (S_r S_s)^{1/2}), with the root taken as
// Tr sqrt(A S_s A), A = S_r^{1/2}. Eigenvalues in [-1e-6, 0) are clipped;
// lower ones raise NumericalError.
double fid(const GaussianStats& r, const GaussianStats& s);

}  // namespace midsg
