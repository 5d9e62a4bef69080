#pragma once

#include <vector>

#include "vqwave/dsp/mel.hpp"

namespace vqwave {

struct EncoderConfig {
  int mel_bins = 80;
  int filters = 768;
  std::vector<int> strides{1, 1, 2, 1, 1};
  std::vector<int> kernels{3, 3, 4, 3, 3};
  int speaker_filters = 64;
  std::vector<int> speaker_strides{1, 1, 2, 1};
  std::vector<int> speaker_kernels{3, 3, 4, 3};

  int num_layers() const { return static_cast<int>(strides.size()); }
  int speaker_layers() const { return static_cast<int>(speaker_strides.size()); }
  /// Product of the speech-stack strides.
  int downsample() const;
  void validate() const;
};

struct QuantizerConfig {
  int num_speech_codebooks = 3;
  int bits = 9;
  int code_dim = 64;
  double commitment = 0.25;
  double ema_decay = 0.99;
  double ema_epsilon = 1e-5;

  int codebook_size() const { return 1 << bits; }
  void validate() const;
};

struct DecoderConfig {
  int frame_gru_hidden = 192;
  int sample_gru_hidden = 896;
  int dense_hidden = 896;
  int upsample_factor = 320;
  int output_classes = 256;
  // Previous sample enters as a learned 256-entry table instead of a scalar.
  bool prev_sample_embedding = false;

  void validate() const;
};

struct ModelConfig {
  dsp::MelConfig mel;
  EncoderConfig encoder;
  QuantizerConfig quantizer;
  DecoderConfig decoder;

  /// Latent frames per second (mel frame rate / encoder downsampling).
  double latent_rate() const;
  /// Width of the decoder conditioning: heads*code_dim + code_dim.
  int conditioning_dim() const { return quantizer.num_speech_codebooks * quantizer.code_dim + quantizer.code_dim; }
  void validate() const;

  /// Full-size architecture (0.9 kb/s with 2 codebooks, 1.35 kb/s with 3).
  static ModelConfig full(int num_speech_codebooks = 3);
  /// Desk-scale model used by tests and the overfit experiments.
  static ModelConfig tiny();
};

}  // namespace vqwave
