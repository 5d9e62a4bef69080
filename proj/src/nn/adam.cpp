#include "vqwave/nn/adam.hpp"

#include <cmath>

#include "vqwave/error.hpp"

namespace vqwave::nn {

void adam_update(Parameter& p, const AdamConfig& cfg, std::int64_t t) {
  if (t < 1) throw invalid_input("adam_update: step must be >= 1");
  if (!p.grad.same_shape(p.value)) throw invalid_input("adam_update: gradient shape differs for " + p.name);
  if (!p.adam_m.same_shape(p.value)) p.adam_m = Tensor(p.value.shape());
  if (!p.adam_v.same_shape(p.value)) p.adam_v = Tensor(p.value.shape());
  const Scalar c1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(t));
  const Scalar c2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(t));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const Scalar g = p.grad[i];
    p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
    p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
    const Scalar m_hat = p.adam_m[i] / c1;
    const Scalar v_hat = p.adam_v[i] / c2;
    p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void Adam::step(std::span<Parameter* const> params) {
  ++t_;
  if (cfg_.grad_clip > 0.0) {
    Scalar sq = 0.0;
    for (const Parameter* p : params) sq += p->grad.mat().squaredNorm();
    const Scalar norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      const Scalar s = cfg_.grad_clip / norm;
      for (Parameter* p : params) p->grad.mat() *= s;
    }
  }
  for (Parameter* p : params) adam_update(*p, cfg_, t_);
}

void Adam::zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!p->grad.same_shape(p->value)) p->grad = Tensor(p->value.shape());
    p->zero_grad();
  }
}

}  // namespace vqwave::nn
