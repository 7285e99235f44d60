#include "domain_oracle.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace midsg::testing {

namespace {

using cd = std::complex<double>;

// |DFT|^2 of an H x W plane via separable naive transforms.
std::vector<double> power_spectrum(const std::vector<double>& plane, int h, int w) {
  std::vector<cd> rows(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int u = 0; u < w; ++u) {
      cd acc = 0;
      for (int x = 0; x < w; ++x)
        acc += plane[static_cast<std::size_t>(y) * w + x] *
               std::polar(1.0, -2.0 * std::numbers::pi * u * x / w);
      rows[static_cast<std::size_t>(y) * w + u] = acc;
    }
  std::vector<double> power(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < w; ++u)
    for (int v = 0; v < h; ++v) {
      cd acc = 0;
      for (int y = 0; y < h; ++y)
        acc += rows[static_cast<std::size_t>(y) * w + u] * std::polar(1.0, -2.0 * std::numbers::pi * v * y / h);
      power[static_cast<std::size_t>(v) * w + u] = std::norm(acc) / (static_cast<double>(h) * w);
    }
  return power;
}

}  // namespace

std::vector<double> oracle_features(const double* planar, int channels, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<double> gray(plane, 0.0);
  for (int c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) gray[i] += planar[c * plane + i] / channels;
  double mean = 0.0, var = 0.0;
  for (double v : gray) mean += v;
  mean /= static_cast<double>(plane);
  for (double v : gray) var += (v - mean) * (v - mean);
  var /= static_cast<double>(plane);

  std::vector<double> centered(gray);
  for (double& v : centered) v -= mean;
  const auto power = power_spectrum(centered, height, width);
  // Radial bands of width 2 (cycles per image), plus the energy at the four
  // quarter-rate diagonal frequencies, which a periodic dot grid concentrates.
  const int nyquist = width / 2;
  const int bands = nyquist / 2 + 2;
  std::vector<double> band(static_cast<std::size_t>(bands), 1e-12);
  double diagonal = 1e-12;
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) {
      const int fu = u <= width / 2 ? u : u - width;
      const int fv = v <= height / 2 ? v : v - height;
      const double p = power[static_cast<std::size_t>(v) * width + u];
      if (std::abs(fu) == width / 4 && std::abs(fv) == height / 4) {
        diagonal += p;
        continue;
      }
      const int b = std::min(bands - 1, static_cast<int>(std::hypot(fu, fv) / 2.0));
      band[static_cast<std::size_t>(b)] += p;
    }
  std::vector<double> f{mean, std::sqrt(var), std::log(diagonal)};
  for (double e : band) f.push_back(std::log(e));
  return f;
}

Eigen::MatrixXd DomainOracle::features(const ag::Tensor& images) const {
  const int n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  const std::size_t per = static_cast<std::size_t>(c) * h * w;
  Eigen::MatrixXd f;
  for (int i = 0; i < n; ++i) {
    auto row = oracle_features(images.values().data() + i * per, c, h, w);
    if (i == 0) f.resize(n, static_cast<Eigen::Index>(row.size()));
    f.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return f;
}

void DomainOracle::fit(const ag::Tensor& images, const std::vector<int>& labels, int num_domains) {
  k_ = num_domains;
  Eigen::MatrixXd f = features(images);
  const Eigen::Index n = f.rows(), d = f.cols();
  mean_ = f.colwise().mean();
  scale_ = ((f.rowwise() - mean_).array().square().colwise().mean().sqrt() + 1e-9).matrix();
  Eigen::MatrixXd x(n, d + 1);
  x.leftCols(d) = ((f.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
  x.col(d).setOnes();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k_);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  w_ = Eigen::MatrixXd::Zero(d + 1, k_);
  const double lr = 0.5, l2 = 1e-4;
  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd logits = x * w_;
    Eigen::VectorXd mx = logits.rowwise().maxCoeff();
    Eigen::MatrixXd p = (logits.colwise() - mx).array().exp().matrix();
    p = (p.array().colwise() / p.rowwise().sum().array()).matrix();
    Eigen::MatrixXd grad = x.transpose() * (p - y) / static_cast<double>(n) + l2 * w_;
    w_ -= lr * grad;
  }
}

std::vector<int> DomainOracle::predict(const ag::Tensor& images) const {
  if (k_ == 0) throw std::logic_error("oracle not fitted");
  Eigen::MatrixXd f = features(images);
  Eigen::MatrixXd x(f.rows(), f.cols() + 1);
  x.leftCols(f.cols()) = ((f.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
  x.col(f.cols()).setOnes();
  Eigen::MatrixXd logits = x * w_;
  std::vector<int> out(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

double DomainOracle::accuracy(const ag::Tensor& images, const std::vector<int>& labels) const {
  auto pred = predict(images);
  int hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace midsg::testing
