#pragma once

#include <random>

#include "vqwave/dsp/waveform.hpp"

namespace vqwave::data {

/// Speech-like test signal: voiced segments (harmonic series on a gliding
/// pitch, shaped by two resonances, with an amplitude envelope) separated
/// by short pauses. Peak level about 0.5.
dsp::Waveform synthetic_speech(double seconds, std::mt19937_64& rng, int sample_rate = dsp::kCodecSampleRate);

enum class SyntheticNoise { White, Pink, Modulated };

/// Noise with RMS 0.25 (rare peaks beyond 1 are clamped); Modulated is white noise with a slow random envelope
/// (a non-stationary stand-in).
dsp::Waveform synthetic_noise(SyntheticNoise kind, double seconds, std::mt19937_64& rng,
                              int sample_rate = dsp::kCodecSampleRate);

}  // namespace vqwave::data
