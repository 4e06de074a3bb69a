#include "evae/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "evae/errors.hpp"

namespace evae {

namespace {

struct RunningMoments {
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  McEstimate finish() const {
    McEstimate e;
    e.n = n;
    e.estimate = sum / static_cast<double>(n);
    const double var =
        std::max(0.0, (sumsq - sum * e.estimate) / static_cast<double>(n > 1 ? n - 1 : 1));
    e.se = std::sqrt(var / static_cast<double>(n));
    return e;
  }
};

int resolve_threads(int max_threads, std::size_t jobs) {
  int cap = max_threads;
  if (cap <= 0) {
    if (const char* env = std::getenv("EVAE_LAB_THREADS")) {
      cap = std::atoi(env);
    }
  }
  if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap <= 0) cap = 1;
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cap), jobs));
}

}  // namespace

double kl_gaussian(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) {
    throw DimensionError("kl_gaussian: mu and logvar length mismatch");
  }
  // Mirrors the op composition in the Tensor overload term by term so both
  // paths produce the same floating-point value.
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double term = ((mu[i] * mu[i] + std::exp(logvar[i])) + -1.0) - logvar[i];
    if (!std::isfinite(term)) throw NumericError("kl_gaussian: non-finite term");
    acc += term;
  }
  return 0.5 * acc;
}

Tensor kl_gaussian(const Tensor& mu, const Tensor& logvar) {
  const Tensor sq = mul(mu, mu);
  const Tensor var = exp(logvar);
  const Tensor core = sub(add_scalar(add(sq, var), -1.0), logvar);
  return scale(sum(core), 0.5);
}

McEstimate chi_square_divergence_mc(const std::function<double(Rng&)>& q_sampler,
                                    const std::function<double(double)>& q_pdf,
                                    const std::function<double(double)>& p_pdf,
                                    std::size_t n_samples, Rng& rng) {
  return divergence_pair_mc(q_sampler, q_pdf, p_pdf, n_samples, rng).chi2;
}

DivergencePairMc divergence_pair_mc(const std::function<double(Rng&)>& q_sampler,
                                    const std::function<double(double)>& q_pdf,
                                    const std::function<double(double)>& p_pdf,
                                    std::size_t n_samples, Rng& rng) {
  if (n_samples < 2) throw ConfigError("divergence mc: need at least 2 samples");
  RunningMoments kl, chi;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double z = q_sampler(rng);
    const double qz = q_pdf(z);
    const double pz = p_pdf(z);
    if (!(pz > 0.0)) {
      throw NumericError("divergence mc: support violation, p vanishes at a q-sample");
    }
    if (!(qz > 0.0)) {
      throw NumericError("divergence mc: q-sample fell where q reports zero density");
    }
    const double ratio = qz / pz;
    kl.add(std::log(ratio));
    chi.add(ratio - 1.0);
  }
  DivergencePairMc out;
  out.kl = kl.finish();
  out.chi2 = chi.finish();
  return out;
}

double evae_penalty(std::span<const double> r, double B, std::size_t minibatch) {
  if (!(B >= 0.0) || !std::isfinite(B)) throw DomainError("evae_penalty: B must be >= 0");
  if (minibatch == 0) throw DomainError("evae_penalty: minibatch must be >= 1");
  // Same order as the op composition: reciprocal, sum, then one scale.
  double acc = 0.0;
  for (double v : r) {
    if (!(v > 0.0)) throw DomainError("evae_penalty: r must be strictly positive");
    acc += 1.0 / v;
  }
  return acc * (3.0 * B / (5.0 * static_cast<double>(minibatch)));
}

Tensor evae_penalty(const Tensor& r, double B, std::size_t minibatch) {
  if (!(B >= 0.0) || !std::isfinite(B)) throw DomainError("evae_penalty: B must be >= 0");
  if (minibatch == 0) throw DomainError("evae_penalty: minibatch must be >= 1");
  for (double v : r.data()) {
    if (!(v > 0.0)) throw DomainError("evae_penalty: r must be strictly positive");
  }
  return scale(sum(reciprocal(r)), 3.0 * B / (5.0 * static_cast<double>(minibatch)));
}

void IseStatSpec::validate() const {
  if (!density || !sampler) throw ConfigError("simulate_ise_stat: density and sampler required");
  if (!(weight_lo < weight_hi)) throw ConfigError("simulate_ise_stat: weight window requires lo < hi");
  constexpr double kLo = 2.0 / 9.0, kHi = 0.25;
  if (!(gamma > kLo && gamma < kHi)) {
    throw ConfigError("simulate_ise_stat: bandwidth exponent " + std::to_string(gamma) +
                      " outside (2/9, 1/4)");
  }
  if (m < 2) throw ConfigError("simulate_ise_stat: m must be >= 2");
  if (R < 1) throw ConfigError("simulate_ise_stat: R must be >= 1");
  quad.validate();
}

namespace {

// One replication: draw m samples, accumulate the KDE on the grid, Simpson
// of the squared deviation over the weight window.
double run_ise_replicate(const IseStatSpec& spec, double b, const std::vector<double>& f_on_grid,
                        double h, Rng rng, std::vector<double>& fm) {
  std::fill(fm.begin(), fm.end(), 0.0);
  const double lo = spec.weight_lo;
  const std::size_t n_grid = fm.size();
  const double k_lo = spec.kernel.support_lo(), k_hi = spec.kernel.support_hi();
  const bool std_epa =
      spec.kernel.family() == KernelFamily::epanechnikov && spec.kernel.mu() == 0.0;
  const double inv_r = 1.0 / spec.kernel.r();

  for (std::size_t s = 0; s < spec.m; ++s) {
    const double y = spec.sampler(rng);
    // grid indices whose t satisfies k_lo <= (t - y)/b <= k_hi
    const double t_min = y + b * k_lo, t_max = y + b * k_hi;
    if (t_max < lo || t_min > spec.weight_hi) continue;
    std::size_t i0 = t_min <= lo ? 0 : static_cast<std::size_t>(std::ceil((t_min - lo) / h));
    std::size_t i1 = t_max >= spec.weight_hi
                         ? n_grid - 1
                         : static_cast<std::size_t>(std::floor((t_max - lo) / h));
    if (i0 >= n_grid) continue;
    i1 = std::min(i1, n_grid - 1);
    if (std_epa) {
      const double c = 0.75 * inv_r;
      for (std::size_t i = i0; i <= i1; ++i) {
        const double u = ((lo + h * static_cast<double>(i)) - y) / b * inv_r;
        const double w = 1.0 - u * u;
        if (w > 0.0) fm[i] += c * w;
      }
    } else {
      for (std::size_t i = i0; i <= i1; ++i) {
        fm[i] += spec.kernel.pdf(((lo + h * static_cast<double>(i)) - y) / b);
      }
    }
  }

  const double scale_kde = 1.0 / (static_cast<double>(spec.m) * b);
  double acc_ends = 0.0, acc_odd = 0.0, acc_even = 0.0;
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double d = fm[i] * scale_kde - f_on_grid[i];
    const double v = d * d;
    if (i == 0 || i == n_grid - 1) {
      acc_ends += v;
    } else if (i % 2 == 1) {
      acc_odd += v;
    } else {
      acc_even += v;
    }
  }
  const double integral = h / 3.0 * (acc_ends + 4.0 * acc_odd + 2.0 * acc_even);
  return static_cast<double>(spec.m) * b * integral;
}

}  // namespace

IseStatResult simulate_ise_stat(const IseStatSpec& spec, Rng& rng, int max_threads) {
  spec.validate();
  const double b = std::pow(static_cast<double>(spec.m), -spec.gamma);
  const std::size_t n_grid = static_cast<std::size_t>(spec.quad.points);
  const double h = (spec.weight_hi - spec.weight_lo) / static_cast<double>(n_grid - 1);

  std::vector<double> f_on_grid(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    f_on_grid[i] = spec.density(spec.weight_lo + h * static_cast<double>(i));
  }

  IseStatResult result;
  result.bandwidth = b;
  result.replicates.assign(spec.R, 0.0);
  {
    QuadratureSpec iq = spec.quad;
    iq.lo = iq.hi = 0.0;  // integrate I over the kernel's own support
    const double mass = simpson([&](double t) { return spec.density(t); }, spec.weight_lo,
                                spec.weight_hi, spec.quad.points);
    result.limit = functional_I(spec.kernel, iq) * mass;
  }

  const int threads = resolve_threads(max_threads, spec.R);
  auto worker = [&](int tid) {
    std::vector<double> fm(n_grid);
    for (std::size_t rep = static_cast<std::size_t>(tid); rep < spec.R;
         rep += static_cast<std::size_t>(threads)) {
      result.replicates[rep] = run_ise_replicate(spec, b, f_on_grid, h, rng.child(0x7a11, rep), fm);
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  RunningMoments stats;
  for (double v : result.replicates) stats.add(v);
  const McEstimate est = stats.finish();
  result.mean = est.estimate;
  result.se = est.se;
  return result;
}

BoundCheck kl_bound_chain_check(double mu, double r, const SamplerConfig& cfg, std::size_t n,
                                std::size_t n_mc, Rng& rng) {
  cfg.validate();
  if (!(cfg.B > 0.0)) throw ConfigError("kl_bound_chain_check: B must be positive");
  if (cfg.prior != PriorFamily::uniform) {
    throw ConfigError("kl_bound_chain_check: the analytic cap requires the uniform prior");
  }
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(mu)) {
    throw DomainError("kl_bound_chain_check: requires finite mu and positive r");
  }
  if (n == 0) throw ConfigError("kl_bound_chain_check: n must be >= 1");
  if (n_mc < 2) throw ConfigError("kl_bound_chain_check: n_mc must be >= 2");

  const double B = cfg.B, b = cfg.b_m;
  const double center = b * mu, half = b * r;
  const double p_inside = 1.0 / B;
  const auto q_pdf = [&](double z) {
    if (half == 0.0) return std::abs(z) <= B / 2.0 ? p_inside : 0.0;
    const double hi_arg = (z + B / 2.0 - center) / half;
    const double lo_arg = (z - B / 2.0 - center) / half;
    return (std_epanechnikov_cdf(hi_arg) - std_epanechnikov_cdf(lo_arg)) / B;
  };

  RunningMoments kl, chi;
  std::size_t outside = 0;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const double k = sample_std_epanechnikov(rng);
    const double u = rng.uniform(-B / 2.0, B / 2.0);
    const double z = b * (mu + r * k) + u;
    const bool inside = std::abs(z) <= B / 2.0;
    if (!inside) {
      ++outside;
      kl.add(0.0);
      chi.add(1.0);
      continue;
    }
    const double ratio = q_pdf(z) / p_inside;
    if (!(ratio > 0.0)) throw NumericError("kl_bound_chain_check: zero posterior density at sample");
    kl.add(std::log(ratio));
    chi.add(ratio - 1.0);
  }

  BoundCheck out;
  const McEstimate kl_est = kl.finish(), chi_est = chi.finish();
  out.kl_mc = kl_est.estimate;
  out.kl_se = kl_est.se;
  out.chi2_mc = chi_est.estimate;
  out.chi2_se = chi_est.se;
  out.analytic_cap = 3.0 * B / (5.0 * static_cast<double>(n) * r);
  out.outside_mass = static_cast<double>(outside) / static_cast<double>(n_mc);
  if (out.outside_mass > 0.5) {
    throw NumericError("kl_bound_chain_check: support violation, most posterior mass lies "
                       "outside the prior box");
  }
  if (!(out.kl_mc <= out.chi2_mc + 3.0 * (out.kl_se + out.chi2_se))) {
    throw NumericError("kl_bound_chain_check: KL exceeded chi-square beyond 3 SE");
  }
  return out;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ConfigError("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double ks_critical_value(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("ks_critical_value: alpha in (0,1)");
  if (n == 0) throw ConfigError("ks_critical_value: n must be >= 1");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace evae
