#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqwave/encoder.hpp"
#include "vqwave/model_config.hpp"
#include "vqwave/nn/layers.hpp"

namespace vqwave {

/// K code vectors with exponential-moving-average k-means statistics.
/// Invariant after every update: codes_i = ema_sum_i / max(ema_count_i, eps).
class Codebook {
 public:
  Codebook() = default;
  Codebook(std::string name, int size, int dim, double decay, double epsilon, nn::Rng& rng);

  int size() const { return static_cast<int>(codes.rows()); }
  int dim() const { return static_cast<int>(codes.cols()); }
  bool initialized() const { return initialized_flag[0] != 0.0; }

  /// Replaces codes with rows drawn from `vectors` (distinct rows when there
  /// are at least K of them) and resets the statistics to N = 1, m = c.
  void initialize_from(const nn::Tensor& vectors, nn::Rng& rng);
  /// Sets codes directly; statistics become N = 1, m = c.
  void set_codes(const nn::Tensor& new_codes);

  /// One EMA k-means step from a minibatch of vectors and their assignments.
  void ema_update(const nn::Tensor& vectors, std::span<const int> assignments);

  void register_state(nn::StateRegistry& reg);

  std::string name;
  double decay = 0.99;
  double epsilon = 1e-5;
  nn::Tensor codes;      // [K x D]
  nn::Tensor ema_count;  // [K]
  nn::Tensor ema_sum;    // [K x D]
  nn::Tensor initialized_flag{nn::Shape{1}};
};

/// Squared-euclidean nearest code; ties go to the lowest index.
/// Returns (index, squared distance).
std::pair<int, double> quantize_nearest(std::span<const double> e, const Codebook& cb);

/// exp(entropy) of the empirical code distribution, in [1, K].
double codebook_perplexity(std::span<const int> indices);

/// Gradient-bearing commitment term: lambda * mean_i ||e_i - sg(e_hat_i)||^2.
nn::Var vq_loss(nn::Var e, const nn::Tensor& e_hat, double lambda);

/// Projection (linear layer to code_dim) followed by a codebook.
class QuantizerHead {
 public:
  QuantizerHead() = default;
  QuantizerHead(std::string name, int in_dim, const QuantizerConfig& cfg, nn::Rng& rng);

  struct Output {
    nn::Var projected;   // e
    nn::Var quantized;   // straight-through output, value exactly e_hat
    nn::Tensor codes;    // e_hat values
    std::vector<int> indices;
    nn::Var commitment;
    double codebook_error = 0.0;  // mean ||sg(e) - e_hat||^2, reported only
  };

  /// Projects, assigns, and applies the straight-through estimator. In train
  /// mode an uninitialised codebook is first seeded from the projected batch.
  /// A non-empty `fixed` overrides the nearest-code assignment.
  Output forward(nn::Tape& tape, nn::Var input, nn::Mode mode, nn::Rng* init_rng, double commitment,
                 std::span<const int> fixed = {});

  nn::Var project(nn::Tape& tape, nn::Var input);
  void register_state(nn::StateRegistry& reg);

  nn::Dense projection;
  Codebook codebook;
};

/// Quantized encoding for one utterance.
struct QuantizedEncoding {
  int heads = 0;
  int code_dim = 0;
  int frames = 0;
  nn::Tensor vectors;        // [frames x heads*code_dim], copies of codebook rows
  std::vector<int> indices;  // [frames x heads], head-major within a frame
  int speaker_index = 0;
  std::vector<double> speaker_vector;
};

/// Assignments to force during a forward pass (finite-difference checks).
struct FixedAssignments {
  std::vector<std::vector<int>> speech;  // per head, batch*frames entries
  std::vector<int> speaker;              // batch entries
};

/// The speech heads plus the single speaker quantizer.
class Bottleneck {
 public:
  Bottleneck() = default;
  Bottleneck(const QuantizerConfig& cfg, int speech_in, int speaker_in, nn::Rng& rng);

  struct Output {
    nn::Var speech;   // [batch*frames x heads*code_dim]
    nn::Var speaker;  // [batch x code_dim]
    std::vector<QuantizerHead::Output> heads;
    QuantizerHead::Output speaker_head;
    nn::Var commitment;           // sum over heads and the speaker quantizer
    double codebook_error = 0.0;  // sum over heads and the speaker quantizer
    int batch = 0;
    int frames = 0;

    FixedAssignments assignments() const;
    /// Unpacks sequence `b` of the batch.
    QuantizedEncoding utterance(int b) const;
  };

  Output forward(nn::Tape& tape, const Encoder::Output& enc, nn::Mode mode, nn::Rng* init_rng,
                 const FixedAssignments* fixed = nullptr);

  /// EMA update of every codebook from a forward pass (per-batch statistics).
  void ema_update(const Output& out);

  /// Rebuilds code vectors from transmitted indices.
  QuantizedEncoding lookup(std::span<const int> indices, int frames, int speaker_index) const;

  void register_state(nn::StateRegistry& reg);
  const QuantizerConfig& config() const { return cfg_; }
  std::vector<QuantizerHead>& speech_heads() { return speech_; }
  const std::vector<QuantizerHead>& speech_heads() const { return speech_; }
  QuantizerHead& speaker_head() { return speaker_; }
  const QuantizerHead& speaker_head() const { return speaker_; }

 private:
  QuantizerConfig cfg_;
  std::vector<QuantizerHead> speech_;
  QuantizerHead speaker_;
};

}  // namespace vqwave
