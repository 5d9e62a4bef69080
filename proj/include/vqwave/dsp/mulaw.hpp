#pragma once

#include <cstdint>
#include <span>

#include "vqwave/dsp/waveform.hpp"

namespace vqwave::dsp {

inline constexpr int kMuLawClasses = 256;
inline constexpr std::uint8_t kMuLawZeroCode = 128;

/// Compands one sample (clamped to [-1, 1]) to an 8-bit code, rounding half up.
std::uint8_t mulaw_encode_sample(double x);
/// Inverse companding of one code to an amplitude in [-1, 1].
double mulaw_decode_sample(std::uint8_t code);

MuLawCode mulaw_encode(std::span<const double> samples);
MuLawCode mulaw_encode(const Waveform& w);
Waveform mulaw_decode(std::span<const std::uint8_t> codes, int sample_rate = kCodecSampleRate);

/// The code mapped linearly onto [-1, 1] (companded domain, not decoded amplitude).
inline double mulaw_code_to_unit(std::uint8_t code) { return 2.0 * code / 255.0 - 1.0; }

}  // namespace vqwave::dsp
