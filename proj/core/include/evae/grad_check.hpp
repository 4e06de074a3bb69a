#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace evae {

// A probe evaluates the scalar loss at the given parameter vector. When
// grad_out is non-empty (same length as params) it must also fill in the
// analytic gradient. Probes must be pure in params: no retained state.
using LossProbe = std::function<double(std::span<const double> params, std::span<double> grad_out)>;

struct GradCheckReport {
  double max_rel_err = 0.0;  // worst discrepancy relative to the gradient scale
  std::size_t worst_index = 0;
  double analytic = 0.0;  // gradient pair at the worst coordinate
  double numeric = 0.0;
  std::size_t skipped = 0;  // coordinates straddling a hinge, not compared
};

// Central-difference check of the probe's analytic gradient. Perturbs each
// coordinate by +-epsilon in place (restoring it afterwards). epsilon must
// lie in [1e-7, 1e-3]; a non-finite loss evaluation raises NumericError.
// Hinges are handled through the one-sided slopes: coordinates where they
// disagree badly (the central difference says nothing about the subgradient
// there) are skipped and counted, and the residual bias a small hinge adds,
// exactly half the slope gap, is discounted from the discrepancy.
GradCheckReport finite_diff_check(const LossProbe& f, std::span<double> params, double epsilon);

}  // namespace evae
