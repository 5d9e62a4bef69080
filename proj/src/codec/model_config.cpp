#include "vqwave/model_config.hpp"

#include <algorithm>
#include <string>

#include "vqwave/error.hpp"

namespace vqwave {

int EncoderConfig::downsample() const {
  int d = 1;
  for (int s : strides) d *= s;
  return d;
}

void EncoderConfig::validate() const {
  if (strides.empty() || strides.size() != kernels.size()) {
    throw usage_error("encoder: strides and kernels must be non-empty and of equal length");
  }
  if (speaker_strides.empty() || speaker_strides.size() != speaker_kernels.size()) {
    throw usage_error("encoder: speaker strides and kernels must be non-empty and of equal length");
  }
  auto check = [](const std::vector<int>& s, const std::vector<int>& k, const char* what) {
    if (std::count(s.begin(), s.end(), 2) != 1 || std::count(s.begin(), s.end(), 1) != static_cast<long>(s.size()) - 1) {
      throw usage_error(std::string("encoder: ") + what + " must contain exactly one stride-2 layer, all others stride 1");
    }
    for (int kk : k) {
      if (kk < 1) throw usage_error(std::string("encoder: ") + what + " kernels must be positive");
    }
  };
  check(strides, kernels, "speech stack");
  check(speaker_strides, speaker_kernels, "speaker stack");
  if (filters < 1 || speaker_filters < 1 || mel_bins < 1) throw usage_error("encoder: sizes must be positive");
}

void QuantizerConfig::validate() const {
  if (num_speech_codebooks < 1) throw usage_error("quantizer: need at least one speech codebook");
  if (bits < 1 || bits > 9) throw usage_error("quantizer: code bits must be in [1, 9]");
  if (code_dim < 1) throw usage_error("quantizer: code_dim must be positive");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw usage_error("quantizer: ema_decay must be in [0, 1]");
  if (commitment < 0.0) throw usage_error("quantizer: commitment must be non-negative");
}

void DecoderConfig::validate() const {
  if (frame_gru_hidden < 1 || sample_gru_hidden < 1 || dense_hidden < 1) throw usage_error("decoder: sizes must be positive");
  if (output_classes != 256) throw usage_error("decoder: output_classes must be 256 (8-bit mu-law)");
  if (upsample_factor < 1) throw usage_error("decoder: upsample_factor must be positive");
}

double ModelConfig::latent_rate() const {
  return static_cast<double>(mel.sample_rate) / (mel.hop_samples() * encoder.downsample());
}

void ModelConfig::validate() const {
  encoder.validate();
  quantizer.validate();
  decoder.validate();
  if (encoder.mel_bins != mel.mel_bins) throw usage_error("encoder mel_bins must match the mel configuration");
  const int expected = mel.hop_samples() * encoder.downsample();
  if (decoder.upsample_factor != expected) {
    throw usage_error("decoder upsample_factor " + std::to_string(decoder.upsample_factor) +
                      " must equal hop * encoder downsampling = " + std::to_string(expected));
  }
}

ModelConfig ModelConfig::full(int num_speech_codebooks) {
  ModelConfig c;
  c.quantizer.num_speech_codebooks = num_speech_codebooks;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.encoder.filters = 64;
  c.encoder.strides = {1, 2};
  c.encoder.kernels = {3, 4};
  c.encoder.speaker_filters = 16;
  c.encoder.speaker_strides = {1, 2};
  c.encoder.speaker_kernels = {3, 4};
  c.quantizer.num_speech_codebooks = 1;
  c.quantizer.bits = 6;
  c.quantizer.code_dim = 16;
  c.decoder.frame_gru_hidden = 32;
  c.decoder.sample_gru_hidden = 64;
  c.decoder.dense_hidden = 64;
  return c;
}

}  // namespace vqwave
