#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace evae {

// Composite-Simpson settings. points must be odd and >= 1001; [lo, hi] is
// the integration window, with lo == hi meaning "use the kernel's support".
struct QuadratureSpec {
  int points = 4001;
  double lo = 0.0;
  double hi = 0.0;
  void validate() const;
  bool window_is_default() const { return lo == hi; }
};

// Composite Simpson on a uniform grid; points must be odd and >= 3.
double simpson(const std::function<double(double)>& f, double lo, double hi, int points);

enum class KernelFamily { epanechnikov, gaussian, uniform, quartic, tabulated };

// One-dimensional kernel with location mu and scale r, parameterized so that
// every family has mean mu and variance r^2/5. That makes the families
// directly comparable in the roughness functional: same first two moments,
// different shapes.
//   epanechnikov: 3/(4r) (1 - ((t-mu)/r)^2) on [mu-r, mu+r]
//   gaussian:     N(mu, sigma^2), sigma = r/sqrt(5), treated as supported on
//                 mu +- 8 sigma for quadrature
//   uniform:      density 1/(2w) on [mu-w, mu+w], w = r sqrt(3/5)
//   quartic:      15/(16h) (1 - ((t-mu)/h)^2)^2 on [mu-h, mu+h], h = r sqrt(7/5)
//   tabulated:    piecewise-linear interpolation of a (grid, value) table
class Kernel {
 public:
  static Kernel epanechnikov(double mu, double r);
  static Kernel gaussian(double mu, double r);
  static Kernel uniform(double mu, double r);
  static Kernel quartic(double mu, double r);
  static Kernel tabulated(std::string name, std::vector<double> grid, std::vector<double> values);
  // Two-column whitespace-separated text: grid value per line; '#' comments.
  static Kernel from_table_file(const std::filesystem::path& path);

  double pdf(double t) const;
  double support_lo() const;
  double support_hi() const;
  double mu() const { return mu_; }
  double r() const { return r_; }
  KernelFamily family() const { return family_; }
  const std::string& name() const { return name_; }

 private:
  Kernel(KernelFamily family, std::string name, double mu, double r);
  KernelFamily family_;
  std::string name_;
  double mu_ = 0.0;
  double r_ = 1.0;
  double half_width_ = 0.0;  // analytic families: distance from mu to support edge
  std::vector<double> grid_, values_;  // tabulated only
};

// Roughness functional integral of K^2 over the support. Validates that the
// kernel integrates to 1 first: within 1e-6 for analytic families, within
// 1e-3 for tabulated ones (sampled tables carry O(h^2) mass error).
double functional_I(const Kernel& k, const QuadratureSpec& q = {});

// Pair functional: the squared L2 norm of the kernel's self-correlation,
// integral over y of (integral of K(t+y) K(t) dt)^2. The inner integral is
// clipped to the exact support overlap so discontinuous kernels (uniform)
// do not poison the quadrature.
double functional_J(const Kernel& k, const QuadratureSpec& q = {});

struct RoughnessRow {
  std::string kernel;
  double i_value = 0.0;
  double j_value = 0.0;
  double margin = 0.0;  // i_value - min over candidates
};

struct RoughnessReport {
  std::vector<RoughnessRow> rows;  // in candidate order
  std::size_t best = 0;        // index of the minimizer
};

// Checks the moment constraints (mass 1, mean mu, variance r^2/5) on every
// candidate, computes I and J, and asserts that the Epanechnikov candidate
// attains the minimum of I up to a 1e-6 slack. Throws ValidationError naming
// the offending candidate otherwise.
RoughnessReport verify_min_roughness(const std::vector<Kernel>& candidates, const QuadratureSpec& q = {});

// CSV: kernel,i_value,j_value,margin
void write_csv(const RoughnessReport& report, std::ostream& out);

}  // namespace evae
