#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vqwave/dsp/waveform.hpp"
#include "vqwave/model_config.hpp"
#include "vqwave/nn/layers.hpp"
#include "vqwave/quantizer.hpp"

namespace vqwave {

/// Builds the teacher-forcing input: each sequence of `codes` shifted right by
/// one with the zero-amplitude start code in front.
dsp::MuLawCode shift_for_teacher_forcing(std::span<const std::uint8_t> codes, int batch);

/// Per-frame [speech codes | speaker code] rows for one utterance.
nn::Tensor condition(const QuantizedEncoding& q);

/// Autoregressive decoder: frame-rate GRU over the conditioning, repetition
/// upsampling to the sample rate, sample-rate GRU fed with the previous
/// mu-law sample, then two dense layers producing 256-way logits.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const DecoderConfig& cfg, int conditioning_dim, nn::Rng& rng);

  /// Concatenates quantized speech rows with the speaker vector repeated per frame.
  nn::Var conditioning(nn::Tape& tape, nn::Var speech, nn::Var speaker, int batch) const;

  /// Logits for every sample, [batch*frames*upsample x 256]. `previous` holds
  /// batch*frames*upsample codes (already shifted).
  nn::Var teacher_forced_logits(nn::Tape& tape, nn::Var cond, int batch, std::span<const std::uint8_t> previous);

  /// Frame-rate part: input-gate contributions of the sample GRU, [frames x 3H].
  nn::Tensor frame_gates(const nn::Tensor& cond);

  /// Samples 320 codes per conditioning frame. temperature 0 means argmax.
  dsp::MuLawCode generate(const nn::Tensor& cond, std::uint64_t seed, double temperature);

  void register_state(nn::StateRegistry& reg);
  const DecoderConfig& config() const { return cfg_; }

  /// Constant-memory step form of the sample-rate network.
  class Stream {
   public:
    Stream(const Decoder& dec, nn::Tensor frame_gates);
    /// Logits for the next sample given the previous code; advances one step.
    std::span<const double> step(std::uint8_t previous);
    std::int64_t position() const { return position_; }
    std::int64_t length() const;

   private:
    const Decoder& dec_;
    nn::Tensor gates_;
    nn::ScalarVector h_, gx_, hidden_, logits_;
    std::int64_t position_ = 0;
  };

 private:
  friend class Stream;

  DecoderConfig cfg_;
  nn::Gru frame_gru_;
  nn::Dense frame_to_gates_;  // sample GRU input projection for the conditioning part (with b_ih)
  nn::Parameter prev_weight_;  // [1 x 3H] scalar input, or [256 x 3H] table
  nn::Parameter w_hh_;
  nn::Parameter b_hh_;
  nn::Dense out1_;
  nn::Dense out2_;
};

/// Draws a class from softmax(logits / temperature) using one uniform variate;
/// temperature 0 returns the first argmax.
int sample_logits(std::span<const double> logits, double temperature, double uniform01);

}  // namespace vqwave
