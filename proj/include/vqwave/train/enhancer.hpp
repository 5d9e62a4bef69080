#pragma once

#include <cstdint>
#include <vector>

#include "vqwave/codec_model.hpp"
#include "vqwave/nn/adam.hpp"
#include "vqwave/train/trainer.hpp"

namespace vqwave::train {

/// Fresh encoder and projections that predict a frozen codec's code indices
/// from noisy input. Class scores are -||e - c_k||^2 against the frozen
/// codebooks, so the predicted index is the nearest frozen code.
class LatentEnhancer {
 public:
  LatentEnhancer(const ModelConfig& cfg, std::uint64_t seed);
  LatentEnhancer(const LatentEnhancer&) = delete;
  LatentEnhancer& operator=(const LatentEnhancer&) = delete;

  struct Output {
    std::vector<nn::Var> speech_logits;  // per head, [batch*frames x K]
    nn::Var speaker_logits;              // [batch x K]
    std::vector<std::vector<int>> speech_pred;
    std::vector<int> speaker_pred;
    int frames = 0;
  };

  Output forward(nn::Tape& tape, const nn::Tensor& mel, int batch, nn::Mode mode, const Bottleneck& frozen);

  /// Predicted indices for one noisy utterance, ready for the frozen decoder.
  QuantizedEncoding predict(CodecModel& frozen, const dsp::Waveform& x);

  nn::StateRegistry& registry() { return registry_; }
  const std::vector<nn::Parameter*>& parameters() const { return registry_.params; }

  Encoder encoder;
  std::vector<nn::Dense> speech_proj;
  nn::Dense speaker_proj;

 private:
  nn::StateRegistry registry_;
};

/// Code indices the frozen codec assigns to clean clips (eval mode).
struct CodeTargets {
  std::vector<std::vector<int>> speech;  // per head, batch*frames
  std::vector<int> speaker;              // per clip
};
CodeTargets codec_assignments(CodecModel& frozen, const std::vector<dsp::Waveform>& clean);

struct EnhancerConfig {
  std::int64_t steps = 500;
  nn::AdamConfig adam{1e-3};
  std::uint64_t seed = 0;
};

struct EnhancerReport {
  std::vector<double> loss;      // per step
  double accuracy = 0.0;         // speech frames, all heads, last evaluation
  double speaker_accuracy = 0.0;
  bool frozen_unchanged = false;
};

/// Per-frame speech-code accuracy and speaker-code accuracy on `data`.
std::pair<double, double> enhancer_accuracy(CodecModel& frozen, LatentEnhancer& enh, const Batch& data);

/// Trains `enh` with per-head cross-entropy against the frozen codec's clean
/// assignments. The frozen model's state is compared bitwise before and after.
/// Accuracy in the report is measured on `eval_data`.
EnhancerReport train_latent_enhancer(CodecModel& frozen, LatentEnhancer& enh, const BatchSource& source,
                                     const EnhancerConfig& cfg, const Batch& eval_data);

/// Bitwise copy of every registered tensor, for freeze checks.
std::vector<nn::Tensor> snapshot_state(const nn::StateRegistry& reg);
bool same_state(const std::vector<nn::Tensor>& a, const std::vector<nn::Tensor>& b);

}  // namespace vqwave::train
