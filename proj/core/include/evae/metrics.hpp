#pragma once

#include <string>
#include <vector>

#include "evae/data.hpp"

namespace evae {

// Mean over images of the per-image variance of the 3x3 Laplace filter
// response, computed on the valid region only (no padding, so borders do not
// manufacture edges). Higher means less blur. Images must be at least 3x3.
double sharpness(const ImageDataset& images);

// Frechet distance between two Gaussians given by mean vectors and row-major
// d x d covariances: ||mu1-mu2||^2 + tr(C1 + C2 - 2(C1 C2)^(1/2)), with the
// matrix square root taken on the symmetrized product and tiny negative
// eigenvalues clamped to zero. If either covariance is numerically singular
// both are ridged with +1e-6 I; *regularized (when given) reports that.
double frechet_gaussian(const std::vector<double>& mu1, const std::vector<double>& cov1,
                        const std::vector<double>& mu2, const std::vector<double>& cov2,
                        bool* regularized = nullptr);

enum class FidFit { real, joint };

struct FidOptions {
  int components = 32;     // PCA feature count, capped at the pixel dimension
  FidFit fit = FidFit::real;  // real: basis from the real set (asymmetric);
                              // joint: basis from the union (symmetric)
};

// FID-style score on PCA pixel features: projects both sets onto the top
// principal components of the fit set, then measures the Frechet distance
// between Gaussian fits of the two feature clouds. Both sets need at least
// 50 images of matching shape. Warns on stderr (and sets *regularized) when
// a singular feature covariance forced a ridge.
double fid_proxy(const ImageDataset& real, const ImageDataset& fake, const FidOptions& opts = {},
                 bool* regularized = nullptr);

// Exact one-sided sign-test tail P(X >= wins) for X ~ Binomial(trials, 1/2).
double binomial_test(int wins, int trials);

// One evaluation run's headline numbers.
struct MetricReport {
  double fid_proxy = 0.0;
  double sharpness = 0.0;
  int n_images = 0;
  std::string config_echo;
};

}  // namespace evae
