#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vqwave/nn/ops.hpp"

namespace vqwave::nn {

using Rng = std::mt19937_64;

/// Named view of every trainable parameter and non-trainable buffer of a model,
/// used by the optimizer and by checkpoints.
struct StateRegistry {
  struct Buffer {
    std::string name;
    Tensor* tensor;
  };
  std::vector<Parameter*> params;
  std::vector<Buffer> buffers;

  void add(Parameter& p) { params.push_back(&p); }
  void add_buffer(std::string name, Tensor& t) { buffers.push_back({std::move(name), &t}); }
};

/// U(-bound, bound) initialisation.
Tensor uniform_tensor(Shape shape, Scalar bound, Rng& rng);

class Dense {
 public:
  Dense() = default;
  Dense(std::string name, int in, int out, Rng& rng, bool bias = true);

  Var forward(Tape& tape, Var x);
  void register_state(StateRegistry& reg);
  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }

  Parameter weight;  // [in x out]
  Parameter bias;    // [out]
  bool has_bias = true;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, int in_channels, int out_channels, int kernel, int stride, Rng& rng);

  Var forward(Tape& tape, Var x, int batch);
  void register_state(StateRegistry& reg);

  Parameter weight;  // [kernel*in x out]
  Parameter bias;
  int kernel = 1;
  int stride = 1;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(std::string name, int channels);

  Var forward(Tape& tape, Var x, Mode mode);
  void register_state(StateRegistry& reg);

  std::string name;
  Parameter gamma;
  Parameter beta;
  BatchNormStats stats;
  Scalar eps = 1e-5;
  Scalar momentum = 0.1;
};

/// GRU layer: input projection x W_ih + b_ih followed by gru_recurrence.
class Gru {
 public:
  Gru() = default;
  Gru(std::string name, int input_size, int hidden_size, Rng& rng);

  Var forward(Tape& tape, Var x, int batch, const Tensor* h0 = nullptr);
  void register_state(StateRegistry& reg);
  int hidden_size() const { return static_cast<int>(w_hh.value.rows()); }

  /// One recurrence step outside any tape. `gates_x` already holds x W_ih + b_ih.
  void step(std::span<const Scalar> gates_x, std::span<Scalar> h) const;

  Parameter w_ih;  // [in x 3H]
  Parameter b_ih;  // [3H]
  Parameter w_hh;  // [H x 3H]
  Parameter b_hh;  // [3H]
};

/// Single GRU step with explicit recurrent parameters; shared by Gru::step and
/// the decoder's streaming path.
void gru_step(const Tensor& w_hh, const Tensor& b_hh, std::span<const Scalar> gates_x, std::span<Scalar> h);

}  // namespace vqwave::nn
