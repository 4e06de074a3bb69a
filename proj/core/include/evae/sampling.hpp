#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evae/rng.hpp"
#include "evae/tensor.hpp"

namespace evae {

enum class PriorFamily { uniform, gaussian };

// Latent-side sampling parameters. B is the prior scale: the uniform prior
// is Unif[-B/2, B/2] per dimension, the gaussian prior is B * N(0,1).
// b_m is the fixed smoothing factor applied to the kernel part of a
// resampled latent; 0 is the degenerate "prior only" setting.
struct SamplerConfig {
  double b_m = 0.3594;
  double B = 0.1;
  PriorFamily prior = PriorFamily::uniform;
  void validate() const;  // b_m and B finite and >= 0
};

// Test hooks that replace the raw noise draws. Size-1 vectors broadcast;
// otherwise the length must equal the number of draws requested.
struct NoiseOverride {
  std::optional<std::vector<double>> kernel;  // standard Epanechnikov draws
  std::optional<std::vector<double>> prior;   // unit-scale prior draws
  std::optional<std::vector<double>> gauss;   // standard normal draws (VAE path)
};

// Standard Epanechnikov variate: the median of three Unif[-1,1] draws.
// Density 3/4 (1 - t^2) on [-1, 1]; CDF 1/2 + 3t/4 - t^3/4; variance 1/5.
double sample_std_epanechnikov(Rng& rng);
void sample_std_epanechnikov(Rng& rng, std::span<double> out);
double std_epanechnikov_cdf(double t);

struct LatentBatch {
  Tensor values;  // [M, d_z]
  enum class Provenance { posterior, prior } provenance = Provenance::posterior;
};

// Latent resampling: z = b_m * (mu + r * k) + u, with k a standard
// Epanechnikov draw and u a prior draw (Unif[-B/2,B/2] or B*N(0,1)).
// Differentiable through mu and r; the noise enters as constants. Kernel
// draws are consumed first (row-major over [M, d_z]), then prior draws.
LatentBatch resample_minibatch(const Tensor& mu, const Tensor& r, const SamplerConfig& cfg,
                               Rng& rng, const NoiseOverride* hook = nullptr);

// Decoder-side latents for unconditional generation: unit-scale prior draws
// times B. Returns a plain [count, d_z] tensor.
Tensor sample_prior(std::size_t count, std::size_t d_z, const SamplerConfig& cfg, Rng& rng,
                    const NoiseOverride* hook = nullptr);

}  // namespace evae
