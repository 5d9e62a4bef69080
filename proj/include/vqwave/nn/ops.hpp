#pragma once

#include <span>
#include <vector>

#include "vqwave/nn/tape.hpp"

namespace vqwave::nn {

// Differentiable operations. Sequences are stored as [batch*time x channels]
// matrices with each sequence occupying a contiguous block of rows.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, Scalar s);
Var sum(Var a);
Var mean(Var a);

Var matmul(Var a, Var b);
/// x * w + bias, bias broadcast over rows. `bias` may be an invalid Var.
Var dense(Var x, Var w, Var bias);

Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);

/// Forward identity; contributes no gradient to `x`.
Var stop_gradient(Var x);

/// e + stop_gradient(replacement - e): the value is exactly `replacement`,
/// the gradient flows to `e` unchanged.
Var straight_through(Var e, const Tensor& replacement);

Var concat_cols(const std::vector<Var>& parts);
/// Repeats every row `factor` times consecutively (nearest-neighbour upsampling).
Var repeat_rows(Var x, int factor);
/// Per-sequence mean over time: [batch*T x C] -> [batch x C].
Var sequence_mean(Var x, int batch);

/// Mean over rows of the squared euclidean row distance, i.e. mean_i ||a_i - b_i||^2.
Var mean_squared_distance(Var a, Var b);

/// Mean of -log softmax(logits)[target] over rows. Throws on targets outside [0, cols).
Var softmax_cross_entropy(Var logits, std::span<const int> targets);

/// Rows of -||x_i - c_k||^2 against a fixed code table (no gradient to `codes`).
Var negative_squared_distance(Var x, const Tensor& codes);

/// 1-D convolution with "same" padding: output length ceil(T / stride).
/// x: [batch*T x Cin], w: [kernel*Cin x Cout] (row k*Cin + c), bias: [Cout].
Var conv1d(Var x, Var w, Var bias, int batch, int kernel, int stride);

/// Output length of conv1d for input length T.
inline int conv1d_output_length(int length, int stride) { return (length + stride - 1) / stride; }

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

enum class Mode { Train, Eval };

/// Per-channel normalisation over all rows. Train mode normalises with batch
/// statistics and updates `stats`; eval mode uses `stats`.
Var batchnorm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode, Scalar eps = 1e-5,
              Scalar momentum = 0.1);

/// Extra per-row gate input `value[i] * weight[index[i]]`, added after upsampling.
struct RowLookupInput {
  Var weight;  // [P x 3H]
  std::vector<int> index;
  std::vector<Scalar> value;
};

/// GRU recurrence over precomputed input gates (input projection and its bias
/// already applied). Gate column blocks are [reset | update | candidate]:
///   r = sig(gx_r + h W_r + b_r), z = sig(gx_z + h W_z + b_z)
///   n = tanh(gx_n + (r * h) W_n + b_n),  h' = (1 - z) * n + z * h
/// `gates` holds batch*F rows; each row is used for `repeat` consecutive steps.
/// `h0` is an optional [batch x H] initial state (zeros when null).
Var gru_recurrence(Var gates, Var w_hh, Var b_hh, int batch, int repeat = 1, const RowLookupInput* extra = nullptr,
                   const Tensor* h0 = nullptr);

}  // namespace vqwave::nn
