#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "evae/kernels.hpp"
#include "evae/rng.hpp"
#include "evae/sampling.hpp"
#include "evae/tensor.hpp"

namespace evae {

// Closed-form KL(N(mu, e^logvar) || N(0,1)) summed over all entries:
//   sum_k (mu_k^2 + e^{lv_k} - 1 - lv_k) / 2
double kl_gaussian(std::span<const double> mu, std::span<const double> logvar);
// Differentiable version built from primitive ops; same summation order, so
// its value matches the plain overload exactly.
Tensor kl_gaussian(const Tensor& mu, const Tensor& logvar);

struct McEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Monte Carlo chi-square divergence E_q[q/p - 1] from q-samples. Throws
// NumericError if p vanishes at a drawn sample (support violation).
McEstimate chi_square_divergence_mc(const std::function<double(Rng&)>& q_sampler,
                                    const std::function<double(double)>& q_pdf,
                                    const std::function<double(double)>& p_pdf,
                                    std::size_t n_samples, Rng& rng);

// KL and chi-square estimated on one shared sample stream. Because
// log t <= t - 1 holds per sample, kl.estimate <= chi2.estimate always.
struct DivergencePairMc {
  McEstimate kl, chi2;
};
DivergencePairMc divergence_pair_mc(const std::function<double(Rng&)>& q_sampler,
                                    const std::function<double(double)>& q_pdf,
                                    const std::function<double(double)>& p_pdf,
                                    std::size_t n_samples, Rng& rng);

// Spread penalty of the sample-based loss: (3 B) / (5 M) * sum over entries
// of 1/r. Equals B/M times the summed Epanechnikov roughness 3/(5 r_k).
double evae_penalty(std::span<const double> r, double B, std::size_t minibatch);
// Differentiable version; gradient w.r.t. r is -(3B)/(5M) / r^2 and nothing
// else receives gradient.
Tensor evae_penalty(const Tensor& r, double B, std::size_t minibatch);

// Weighted integrated squared KDE deviation,
//   S = m b * int_{lo}^{hi} (f_m(t) - f(t))^2 dt,  b = m^{-gamma},
// replicated R times with independent sample sets. As m grows the mean
// approaches I(kernel) * int_{lo}^{hi} f; the bandwidth exponent must sit in
// the window (2/9, 1/4) for that normalization to hold.
struct IseStatSpec {
  std::function<double(double)> density;  // f, evaluated on [lo, hi]
  std::function<double(Rng&)> sampler;    // draws from f
  double weight_lo = 0.25;
  double weight_hi = 0.75;
  Kernel kernel = Kernel::epanechnikov(0.0, 1.0);
  double gamma = 0.23;
  std::size_t m = 10000;
  std::size_t R = 200;
  // Only `points` is used; the window is [weight_lo, weight_hi].
  QuadratureSpec quad{.points = 2001};
  void validate() const;
};

struct IseStatResult {
  double mean = 0.0;
  double se = 0.0;
  double limit = 0.0;      // I(kernel) * int f over the window
  double bandwidth = 0.0;  // m^-gamma
  std::vector<double> replicates;
};

// Replications run on up to max_threads threads (0 means: EVAE_LAB_THREADS
// if set, else hardware concurrency). Each replication owns the rng child
// stream keyed by its index, so results are identical at any thread count.
IseStatResult simulate_ise_stat(const IseStatSpec& spec, Rng& rng, int max_threads = 0);

// The divergence chain for one latent dimension of the smoothed posterior
// z = b_m (mu + r k) + u against the uniform prior u ~ Unif[-B/2, B/2]:
// Monte Carlo KL and chi-square (both restricted to the prior's support,
// which is where the chain's density-ratio weight lives), plus the analytic
// cap 3 B / (5 n r). The smoothed posterior always spills some mass outside
// the prior's box; outside_mass reports that spill, and beyond 0.5 the
// result would be meaningless, so the check raises NumericError instead.
// The restricted KL can dip below zero when spill is large (the excluded
// tail carries positive KL mass); kl_mc <= chi2_mc still holds per sample.
struct BoundCheck {
  double kl_mc = 0.0;
  double kl_se = 0.0;
  double chi2_mc = 0.0;
  double chi2_se = 0.0;
  double analytic_cap = 0.0;
  double outside_mass = 0.0;
};
BoundCheck kl_bound_chain_check(double mu, double r, const SamplerConfig& cfg, std::size_t n,
                                std::size_t n_mc, Rng& rng);

// Kolmogorov-Smirnov distance between a sample and a reference CDF, plus the
// asymptotic critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_critical_value(double alpha, std::size_t n);

}  // namespace evae
