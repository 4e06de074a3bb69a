#include "evae/optim.hpp"

#include <cmath>
#include <string>

#include "evae/errors.hpp"

namespace evae {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adam: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 outside [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 outside [0,1)");
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamSlot& slot,
                 const AdamConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size()) {
    throw DimensionError("adam_update: params/grads length mismatch");
  }
  if (slot.m.empty() && slot.t == 0) {
    slot.m.assign(params.size(), 0.0);
    slot.v.assign(params.size(), 0.0);
  }
  if (slot.m.size() != params.size()) {
    throw DimensionError("adam_update: slot sized for " + std::to_string(slot.m.size()) +
                         " params, got " + std::to_string(params.size()));
  }
  slot.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(slot.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(slot.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw NumericError("adam_update: non-finite gradient");
    slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * g;
    slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = slot.m[i] / c1;
    const double vhat = slot.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), slots_(params_.size()), cfg_(cfg) {
  cfg_.validate();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_update(params_[i].mutable_data(), params_[i].grad(), slots_[i], cfg_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace evae
