#include "evae/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "evae/errors.hpp"

namespace evae {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kRidge = 1e-6;

MatrixXd dataset_matrix(const ImageDataset& ds) {
  const int n = ds.count();
  const int d = ds.pixels_per_image();
  MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(ds.pixels[i].size()) != d) {
      throw ValidationError("image pixel count does not match height*width");
    }
    for (int j = 0; j < d; ++j) m(i, j) = ds.pixels[i][j];
  }
  return m;
}

// Sample covariance (1/(n-1)) of row observations, plus the mean.
void gaussian_fit(const MatrixXd& rows, VectorXd& mu, MatrixXd& cov) {
  const auto n = rows.rows();
  mu = rows.colwise().mean();
  MatrixXd centered = rows.rowwise() - mu.transpose();
  cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

double frechet_from_fits(const VectorXd& mu1, MatrixXd cov1, const VectorXd& mu2, MatrixXd cov2,
                         bool* regularized) {
  const auto d = mu1.size();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es1(cov1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es2(cov2);
  const double scale = std::max({1.0, es1.eigenvalues().maxCoeff(), es2.eigenvalues().maxCoeff()});
  const bool singular = es1.eigenvalues().minCoeff() <= 1e-10 * scale ||
                        es2.eigenvalues().minCoeff() <= 1e-10 * scale;
  if (regularized != nullptr) *regularized = singular;
  if (singular) {
    cov1.diagonal().array() += kRidge;
    cov2.diagonal().array() += kRidge;
    es1.compute(cov1);
    es2.compute(cov2);
  }

  VectorXd lam1 = es1.eigenvalues().cwiseMax(0.0);
  MatrixXd sqrt1 = es1.eigenvectors() * lam1.cwiseSqrt().asDiagonal() * es1.eigenvectors().transpose();
  MatrixXd prod = sqrt1 * cov2 * sqrt1;
  prod = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> esp(prod);
  const double trace_sqrt = esp.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double mean_term = (mu1 - mu2).squaredNorm();
  const double value = mean_term + cov1.trace() + cov2.trace() - 2.0 * trace_sqrt;
  (void)d;
  return std::max(0.0, value);
}

}  // namespace

double sharpness(const ImageDataset& images) {
  if (images.count() == 0) throw ValidationError("sharpness: dataset holds no images");
  const int h = images.height;
  const int w = images.width;
  if (h < 3 || w < 3) throw DimensionError("sharpness: images must be at least 3x3");

  const int vh = h - 2;
  const int vw = w - 2;
  const int m = vh * vw;
  double total = 0.0;
  for (const auto& img : images.pixels) {
    if (static_cast<int>(img.size()) != h * w) {
      throw ValidationError("image pixel count does not match height*width");
    }
    double sum = 0.0;
    double sumsq = 0.0;
    for (int y = 1; y < h - 1; ++y) {
      for (int x = 1; x < w - 1; ++x) {
        const auto at = [&](int yy, int xx) { return img[static_cast<std::size_t>(yy) * w + xx]; };
        const double a =
            at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
        sum += a;
        sumsq += a * a;
      }
    }
    const double mean = sum / m;
    total += sumsq / m - mean * mean;
  }
  return total / images.count();
}

double frechet_gaussian(const std::vector<double>& mu1, const std::vector<double>& cov1,
                        const std::vector<double>& mu2, const std::vector<double>& cov2,
                        bool* regularized) {
  const auto d = static_cast<Eigen::Index>(mu1.size());
  if (d == 0) throw DimensionError("frechet_gaussian: empty mean vector");
  if (static_cast<Eigen::Index>(mu2.size()) != d) {
    throw DimensionError("frechet_gaussian: mean vectors differ in length");
  }
  if (static_cast<Eigen::Index>(cov1.size()) != d * d ||
      static_cast<Eigen::Index>(cov2.size()) != d * d) {
    throw DimensionError("frechet_gaussian: covariance is not d*d for the given mean");
  }
  VectorXd m1 = Eigen::Map<const VectorXd>(mu1.data(), d);
  VectorXd m2 = Eigen::Map<const VectorXd>(mu2.data(), d);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  MatrixXd c1 = Eigen::Map<const RowMat>(cov1.data(), d, d);
  MatrixXd c2 = Eigen::Map<const RowMat>(cov2.data(), d, d);
  return frechet_from_fits(m1, c1, m2, c2, regularized);
}

double fid_proxy(const ImageDataset& real, const ImageDataset& fake, const FidOptions& opts,
                 bool* regularized) {
  if (real.count() < 50 || fake.count() < 50) {
    throw ValidationError("fid_proxy: both sets need at least 50 images");
  }
  if (real.height != fake.height || real.width != fake.width) {
    throw DimensionError("fid_proxy: image shapes differ between the two sets");
  }
  if (opts.components < 1) throw ConfigError("fid_proxy: components must be positive");

  MatrixXd xr = dataset_matrix(real);
  MatrixXd xf = dataset_matrix(fake);
  const int d = static_cast<int>(xr.cols());
  const int k = std::min(opts.components, d);

  // PCA basis from the fit set: mean-center, then top-k covariance directions.
  VectorXd fit_mean;
  MatrixXd fit_cov;
  if (opts.fit == FidFit::joint) {
    MatrixXd both(xr.rows() + xf.rows(), d);
    both << xr, xf;
    gaussian_fit(both, fit_mean, fit_cov);
  } else {
    gaussian_fit(xr, fit_mean, fit_cov);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(fit_cov);
  MatrixXd basis = es.eigenvectors().rightCols(k);

  MatrixXd fr = (xr.rowwise() - fit_mean.transpose()) * basis;
  MatrixXd ff = (xf.rowwise() - fit_mean.transpose()) * basis;

  VectorXd mu_r, mu_f;
  MatrixXd cov_r, cov_f;
  gaussian_fit(fr, mu_r, cov_r);
  gaussian_fit(ff, mu_f, cov_f);

  bool ridged = false;
  const double value = frechet_from_fits(mu_r, cov_r, mu_f, cov_f, &ridged);
  if (ridged) {
    std::fprintf(stderr, "fid_proxy: singular feature covariance, ridged with +%g*I\n", kRidge);
  }
  if (regularized != nullptr) *regularized = ridged;
  return value;
}

double binomial_test(int wins, int trials) {
  if (trials < 1) throw DomainError("binomial_test: trials must be at least 1");
  if (wins < 0 || wins > trials) {
    throw DomainError("binomial_test: wins must lie in [0, trials]");
  }
  // Exact tail under p = 1/2: sum C(trials, i) / 2^trials for i >= wins.
  // The multiplicative recurrence keeps every C(trials, i) exact in double
  // for the desk-scale trial counts used here.
  const double denom = std::ldexp(1.0, -trials);
  double coeff = 1.0;
  double tail = 0.0;
  for (int i = 0; i <= trials; ++i) {
    if (i >= wins) tail += coeff * denom;
    coeff = coeff * static_cast<double>(trials - i) / static_cast<double>(i + 1);
  }
  return std::min(1.0, tail);
}

}  // namespace evae
