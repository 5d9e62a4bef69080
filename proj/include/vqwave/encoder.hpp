#pragma once

#include <vector>

#include "vqwave/dsp/mel.hpp"
#include "vqwave/model_config.hpp"
#include "vqwave/nn/layers.hpp"

namespace vqwave {

/// Frame-rate encoding E (pre-projection), one row per latent frame.
struct Encoding {
  nn::Tensor frames;  // [T_latent x filters]
  double source_duration = 0.0;
};

struct SpeakerEmbedding {
  std::vector<double> vector;
};

/// Stacks equal-length spectrograms into a [batch*T x bins] tensor.
nn::Tensor stack_mel(const std::vector<dsp::LogMelSpectrogram>& mels);

/// Latent frames produced from `mel_frames` analysis frames.
int latent_frame_count(int mel_frames, const EncoderConfig& cfg);

/// Speech encoder (conv -> batchnorm -> ReLU per layer) and the separate
/// speaker encoder whose output is averaged over time.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, nn::Rng& rng, const std::string& prefix = "encoder");

  struct Output {
    nn::Var speech;   // [batch*T_latent x filters]
    nn::Var speaker;  // [batch x speaker_filters]
    int batch = 0;
    int frames = 0;   // latent frames per sequence
  };

  /// `mel` is [batch*T x mel_bins]. Throws InvalidInput("input too short") below 2 frames.
  Output forward(nn::Tape& tape, const nn::Tensor& mel, int batch, nn::Mode mode);
  nn::Var forward_speech(nn::Tape& tape, nn::Var mel, int batch, nn::Mode mode);
  nn::Var forward_speaker(nn::Tape& tape, nn::Var mel, int batch, nn::Mode mode);

  void register_state(nn::StateRegistry& reg);
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    nn::Conv1d conv;
    nn::BatchNorm norm;
  };
  static nn::Var run_stack(nn::Tape& tape, std::vector<Block>& stack, nn::Var x, int batch, nn::Mode mode);

  EncoderConfig cfg_;
  std::vector<Block> speech_;
  std::vector<Block> speaker_;
};

Encoding encode_speech(Encoder& enc, const dsp::LogMelSpectrogram& mel, nn::Mode mode = nn::Mode::Eval);
SpeakerEmbedding encode_speaker(Encoder& enc, const dsp::LogMelSpectrogram& mel, nn::Mode mode = nn::Mode::Eval);

}  // namespace vqwave
