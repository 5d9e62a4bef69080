#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vqwave/bitstream.hpp"
#include "vqwave/decoder.hpp"
#include "vqwave/dsp/waveform.hpp"
#include "vqwave/encoder.hpp"
#include "vqwave/quantizer.hpp"

namespace vqwave {

/// Paired model input and clean target clips of equal length.
struct Batch {
  std::vector<dsp::Waveform> x;
  std::vector<dsp::Waveform> target;

  int size() const { return static_cast<int>(x.size()); }
};

/// Encoder, bottleneck and decoder with one shared state registry.
class CodecModel {
 public:
  CodecModel(const ModelConfig& cfg, std::uint64_t seed);
  CodecModel(const CodecModel&) = delete;
  CodecModel& operator=(const CodecModel&) = delete;

  /// Teacher-forced forward pass over a batch.
  struct Forward {
    Encoder::Output encoded;
    Bottleneck::Output quantized;
    nn::Var logits;      // [batch*samples x 256]
    nn::Var ce;          // mean cross-entropy against mu-law(target)
    nn::Var commitment;  // lambda-weighted commitment over all quantizers
    nn::Var total;       // ce + commitment
    std::vector<int> targets;
  };

  /// `init_rng` seeds uninitialised codebooks in train mode.
  Forward forward(nn::Tape& tape, const Batch& batch, nn::Mode mode, nn::Rng* init_rng = nullptr,
                  const FixedAssignments* fixed = nullptr);

  /// [batch*frames x bins] log-mel features of equal-length clips.
  nn::Tensor mel_features(const std::vector<dsp::Waveform>& clips) const;

  /// Indices for one utterance (eval mode).
  QuantizedEncoding encode(const dsp::Waveform& w);
  /// Waveform of 320 samples per latent frame.
  dsp::Waveform decode(const QuantizedEncoding& q, std::uint64_t seed, double temperature);

  /// Header describing this model's compressed stream for `frames` frames.
  BitstreamHeader stream_header(std::uint32_t frames, int speaker_index) const;
  std::vector<std::uint8_t> encode_to_bytes(const dsp::Waveform& w);
  /// Throws Incompatible (naming both values) when the stream does not fit the model.
  dsp::Waveform decode_bytes(std::span<const std::uint8_t> bytes, std::uint64_t seed, double temperature);

  const ModelConfig& config() const { return cfg_; }
  nn::StateRegistry& registry() { return registry_; }
  const std::vector<nn::Parameter*>& parameters() const { return registry_.params; }

  Encoder encoder;
  Bottleneck bottleneck;
  Decoder decoder;

 private:
  ModelConfig cfg_;
  nn::StateRegistry registry_;
};

}  // namespace vqwave
