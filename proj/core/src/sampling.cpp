#include "evae/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evae/errors.hpp"

namespace evae {

namespace {

// Pulls `n` noise values: from the override when provided (size-1
// broadcasts), otherwise by invoking `draw` n times in order.
template <typename Draw>
std::vector<double> noise_vector(const std::optional<std::vector<double>>& forced, std::size_t n,
                                 const char* what, Draw draw) {
  std::vector<double> out(n);
  if (forced) {
    if (forced->size() == 1) {
      std::fill(out.begin(), out.end(), (*forced)[0]);
    } else if (forced->size() == n) {
      std::copy(forced->begin(), forced->end(), out.begin());
    } else {
      throw DimensionError(std::string("noise override for ") + what + " has " +
                           std::to_string(forced->size()) + " values, need 1 or " +
                           std::to_string(n));
    }
    return out;
  }
  for (auto& v : out) v = draw();
  return out;
}

double unit_prior_draw(PriorFamily prior, Rng& rng) {
  return prior == PriorFamily::uniform ? rng.uniform(-0.5, 0.5) : rng.normal();
}

}  // namespace

void SamplerConfig::validate() const {
  if (!(b_m >= 0.0) || !std::isfinite(b_m)) {
    throw ConfigError("sampler: b_m must be finite and >= 0");
  }
  // B = 0 degenerates to a point prior; resampling and the penalty both
  // stay well defined there, so only negative or non-finite B is rejected.
  if (!(B >= 0.0) || !std::isfinite(B)) {
    throw ConfigError("sampler: B must be finite and >= 0");
  }
}

double sample_std_epanechnikov(Rng& rng) {
  const double a = rng.uniform(-1.0, 1.0);
  const double b = rng.uniform(-1.0, 1.0);
  const double c = rng.uniform(-1.0, 1.0);
  // median of three
  return a + b + c - std::min({a, b, c}) - std::max({a, b, c});
}

void sample_std_epanechnikov(Rng& rng, std::span<double> out) {
  for (auto& v : out) v = sample_std_epanechnikov(rng);
}

double std_epanechnikov_cdf(double t) {
  if (t <= -1.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 0.5 + 0.75 * t - 0.25 * t * t * t;
}

LatentBatch resample_minibatch(const Tensor& mu, const Tensor& r, const SamplerConfig& cfg,
                               Rng& rng, const NoiseOverride* hook) {
  cfg.validate();
  if (mu.shape().size() != 2 || r.shape().size() != 2 || mu.shape() != r.shape()) {
    throw DimensionError("resample_minibatch: mu and r must share an [M, d_z] shape");
  }
  for (double v : r.data()) {
    if (!(v > 0.0)) throw DomainError("resample_minibatch: r must be strictly positive");
  }
  const std::size_t n = mu.size();
  auto kernel_noise = noise_vector(hook ? hook->kernel : std::nullopt, n, "kernel",
                                   [&] { return sample_std_epanechnikov(rng); });
  auto prior_noise = noise_vector(hook ? hook->prior : std::nullopt, n, "prior",
                                  [&] { return unit_prior_draw(cfg.prior, rng); });
  for (auto& u : prior_noise) u *= cfg.B;

  const Tensor k = Tensor::from_data(mu.shape(), std::move(kernel_noise));
  const Tensor u = Tensor::from_data(mu.shape(), std::move(prior_noise));
  LatentBatch batch;
  batch.values = add(scale(add(mu, mul(r, k)), cfg.b_m), u);
  batch.provenance = LatentBatch::Provenance::posterior;
  return batch;
}

Tensor sample_prior(std::size_t count, std::size_t d_z, const SamplerConfig& cfg, Rng& rng,
                    const NoiseOverride* hook) {
  cfg.validate();
  if (d_z == 0) throw DimensionError("sample_prior: d_z must be >= 1");
  auto noise = noise_vector(hook ? hook->prior : std::nullopt, count * d_z, "prior",
                            [&] { return unit_prior_draw(cfg.prior, rng); });
  for (auto& v : noise) v *= cfg.B;
  return Tensor::from_data({count, d_z}, std::move(noise));
}

}  // namespace evae
