#include "midsg/fid.hpp"

#include <cmath>

#include "midsg/errors.hpp"
#include "midsg/ops.hpp"

namespace midsg {

namespace {

constexpr double kClip = 1e-6;
constexpr double kPsdTol = 1e-8;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericalError(std::string("eigendecomposition failed for ") + what);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -kClip)
      throw NumericalError(std::string(what) + " has eigenvalue " + std::to_string(ev[i]) +
                           " below the clipping tolerance");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_stats(const GaussianStats& g, const char* name) {
  if (g.sigma.rows() != g.dim() || g.sigma.cols() != g.dim())
    throw ValidationError(std::string(name) + ": covariance shape does not match mean");
  if (!g.mu.allFinite() || !g.sigma.allFinite())
    throw ValidationError(std::string(name) + ": non-finite statistics");
  const double asym = (g.sigma - g.sigma.transpose()).cwiseAbs().maxCoeff();
  if (g.dim() > 0 && asym > kPsdTol * std::max(1.0, g.sigma.cwiseAbs().maxCoeff()))
    throw ValidationError(std::string(name) + ": covariance is not symmetric");
}

}  // namespace

GaussianStats gaussian_stats(std::span<const double> features, int n, int d) {
  if (n < 2) throw ValidationError("embed: at least 2 images are required");
  if (features.size() != static_cast<std::size_t>(n) * d)
    throw ValidationError("gaussian_stats: feature count does not match n x d");
  Eigen::Map<const RowMat> F(features.data(), n, d);
  GaussianStats g;
  g.n = n;
  g.mu = F.colwise().mean().transpose();
  RowMat centered = F.rowwise() - g.mu.transpose();
  g.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  g.sigma = 0.5 * (g.sigma + g.sigma.transpose()).eval();
  return g;
}

std::vector<double> embed_features(const FeatureExtractor& phi, const ag::Tensor& images, int chunk) {
  ag::NoGradGuard guard;
  const int n = images.dim(0);
  const std::size_t per = images.numel() / static_cast<std::size_t>(std::max(n, 1));
  std::vector<double> out;
  for (int begin = 0; begin < n; begin += chunk) {
    const int m = std::min(chunk, n - begin);
    ag::Shape shape = images.shape();
    shape[0] = m;
    auto src = images.values().subspan(begin * per, m * per);
    ag::Tensor e = phi.embed(ag::Tensor::from(shape, std::vector<double>(src.begin(), src.end())));
    out.insert(out.end(), e.values().begin(), e.values().end());
  }
  return out;
}

GaussianStats embed(const FeatureExtractor& phi, const ag::Tensor& images) {
  if (images.rank() != 4 || images.dim(0) < 2)
    throw ValidationError("embed: at least 2 images are required");
  auto f = embed_features(phi, images);
  const int n = images.dim(0);
  return gaussian_stats(f, n, static_cast<int>(f.size() / static_cast<std::size_t>(n)));
}

GaussianStats embed(const FeatureExtractor& phi, std::span<const Sample> samples) {
  if (samples.size() < 2) throw ValidationError("embed: at least 2 images are required");
  std::vector<double> feats;
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    auto part = samples.subspan(begin, std::min(kChunk, samples.size() - begin));
    auto f = embed_features(phi, load_batch(part).data);
    feats.insert(feats.end(), f.begin(), f.end());
  }
  const int n = static_cast<int>(samples.size());
  return gaussian_stats(feats, n, static_cast<int>(feats.size() / samples.size()));
}

double fid(const GaussianStats& r, const GaussianStats& s) {
  if (r.dim() != s.dim()) throw ValidationError("fid: dimension mismatch");
  check_stats(r, "fid(real)");
  check_stats(s, "fid(synthetic)");
  const Eigen::MatrixXd a = psd_sqrt(r.sigma, "real covariance");
  Eigen::MatrixXd prod = a * s.sigma * a;
  prod = 0.5 * (prod + prod.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prod, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("fid: eigendecomposition failed");
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev < -kClip)
      throw NumericalError("fid: covariance product has eigenvalue " + std::to_string(ev));
    tr_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  const double value = (r.mu - s.mu).squaredNorm() + r.sigma.trace() + s.sigma.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

}  // namespace midsg
