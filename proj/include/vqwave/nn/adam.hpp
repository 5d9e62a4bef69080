#pragma once

#include <cstdint>
#include <span>

#include "vqwave/nn/tape.hpp"

namespace vqwave::nn {

struct AdamConfig {
  Scalar lr = 1e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  // Global-norm gradient clipping; <= 0 disables it.
  Scalar grad_clip = 0.0;
};

/// Bias-corrected Adam update of one parameter at step t (t >= 1), using
/// p.grad and the moment accumulators stored on the parameter.
void adam_update(Parameter& p, const AdamConfig& cfg, std::int64_t t);

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Advances the step counter and updates every parameter.
  void step(std::span<Parameter* const> params);
  void zero_grad(std::span<Parameter* const> params);

  std::int64_t steps() const { return t_; }
  void set_steps(std::int64_t t) { t_ = t; }
  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace vqwave::nn
