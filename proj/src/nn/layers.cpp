#include "vqwave/nn/layers.hpp"

#include <cmath>

#include "vqwave/error.hpp"

namespace vqwave::nn {

Tensor uniform_tensor(Shape shape, Scalar bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Dense::Dense(std::string name, int in, int out, Rng& rng, bool bias_on) : has_bias(bias_on) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in));
  weight = Parameter(name + ".weight", uniform_tensor({in, out}, bound, rng));
  if (has_bias) bias = Parameter(name + ".bias", uniform_tensor({out}, bound, rng));
}

Var Dense::forward(Tape& tape, Var x) {
  return dense(x, tape.param(weight), has_bias ? tape.param(bias) : Var{});
}

void Dense::register_state(StateRegistry& reg) {
  reg.add(weight);
  if (has_bias) reg.add(bias);
}

Conv1d::Conv1d(std::string name, int in_channels, int out_channels, int kernel_, int stride_, Rng& rng)
    : kernel(kernel_), stride(stride_) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in_channels * kernel));
  weight = Parameter(name + ".weight", uniform_tensor({kernel * in_channels, out_channels}, bound, rng));
  bias = Parameter(name + ".bias", uniform_tensor({out_channels}, bound, rng));
}

Var Conv1d::forward(Tape& tape, Var x, int batch) {
  return conv1d(x, tape.param(weight), tape.param(bias), batch, kernel, stride);
}

void Conv1d::register_state(StateRegistry& reg) {
  reg.add(weight);
  reg.add(bias);
}

BatchNorm::BatchNorm(std::string name_, int channels) : name(std::move(name_)) {
  gamma = Parameter(name + ".gamma", Tensor({channels}, 1.0));
  beta = Parameter(name + ".beta", Tensor({channels}, 0.0));
  stats.running_mean = Tensor({channels}, 0.0);
  stats.running_var = Tensor({channels}, 1.0);
}

Var BatchNorm::forward(Tape& tape, Var x, Mode mode) {
  return batchnorm(x, tape.param(gamma), tape.param(beta), stats, mode, eps, momentum);
}

void BatchNorm::register_state(StateRegistry& reg) {
  reg.add(gamma);
  reg.add(beta);
  reg.add_buffer(name + ".running_mean", stats.running_mean);
  reg.add_buffer(name + ".running_var", stats.running_var);
}

Gru::Gru(std::string name, int input_size, int hidden, Rng& rng) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(hidden));
  w_ih = Parameter(name + ".w_ih", uniform_tensor({input_size, 3 * hidden}, bound, rng));
  b_ih = Parameter(name + ".b_ih", uniform_tensor({3 * hidden}, bound, rng));
  w_hh = Parameter(name + ".w_hh", uniform_tensor({hidden, 3 * hidden}, bound, rng));
  b_hh = Parameter(name + ".b_hh", uniform_tensor({3 * hidden}, bound, rng));
}

Var Gru::forward(Tape& tape, Var x, int batch, const Tensor* h0) {
  const Var gates = dense(x, tape.param(w_ih), tape.param(b_ih));
  return gru_recurrence(gates, tape.param(w_hh), tape.param(b_hh), batch, 1, nullptr, h0);
}

void Gru::register_state(StateRegistry& reg) {
  reg.add(w_ih);
  reg.add(b_ih);
  reg.add(w_hh);
  reg.add(b_hh);
}

void Gru::step(std::span<const Scalar> gates_x, std::span<Scalar> h) const { gru_step(w_hh.value, b_hh.value, gates_x, h); }

void gru_step(const Tensor& w_hh, const Tensor& b_hh, std::span<const Scalar> gates_x, std::span<Scalar> h) {
  const auto hidden = w_hh.rows();
  if (static_cast<std::int64_t>(h.size()) != hidden || static_cast<std::int64_t>(gates_x.size()) != 3 * hidden) {
    throw invalid_input("gru_step: size mismatch");
  }
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  Eigen::Map<RowVec> hv(h.data(), hidden);
  Eigen::Map<const RowVec> gx(gates_x.data(), 3 * hidden);
  Eigen::Map<const RowVec> b(b_hh.data(), 3 * hidden);
  const auto w = w_hh.mat();
  // Same expression structure as gru_recurrence so both paths round identically.
  RowVec hrz = hv * w.leftCols(2 * hidden);
  hrz += b.head(2 * hidden);
  RowVec r = (-(gx.head(hidden) + hrz.head(hidden)).array()).exp().matrix();
  r = (1.0 + r.array()).inverse().matrix();
  RowVec z = (-(gx.segment(hidden, hidden) + hrz.tail(hidden)).array()).exp().matrix();
  z = (1.0 + z.array()).inverse().matrix();
  const RowVec rh = r.cwiseProduct(hv);
  RowVec a = rh * w.rightCols(hidden);
  a += b.tail(hidden);
  // tanh(x) = 2 / (1 + exp(-2x)) - 1, which vectorises where tanh does not.
  const RowVec n = (2.0 / (1.0 + (-2.0 * (gx.tail(hidden) + a).array()).exp()) - 1.0).matrix();
  hv = ((1.0 - z.array()) * n.array() + z.array() * hv.array()).matrix();
}

}  // namespace vqwave::nn
