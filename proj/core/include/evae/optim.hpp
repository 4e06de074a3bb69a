#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evae/tensor.hpp"

namespace evae {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;  // lr >= 0, betas in [0,1), eps > 0
};

// First/second moment buffers for one parameter array.
struct AdamSlot {
  std::vector<double> m, v;
  long t = 0;
};

// One bias-corrected Adam step on a raw parameter array:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// The slot is created for the array's length on first use; a later length
// mismatch throws DimensionError.
void adam_update(std::span<double> params, std::span<const double> grads, AdamSlot& slot,
                 const AdamConfig& cfg);

// Convenience wrapper driving adam_update over a set of parameter tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);
  void step();       // consumes current grads
  void zero_grad();  // clears grads on all parameters

 private:
  std::vector<Tensor> params_;
  std::vector<AdamSlot> slots_;
  AdamConfig cfg_;
};

}  // namespace evae
