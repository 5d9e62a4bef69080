#pragma once

#include <optional>
#include <random>
#include <utility>

#include "vqwave/data/manifest.hpp"
#include "vqwave/data/mixing.hpp"
#include "vqwave/data/room.hpp"

namespace vqwave::data {

enum class NoiseMode {
  Standard,  // SNR uniform in [-5, 25] dB
  LowNoise,  // SNR uniform in [5, 25] dB
  Clean,     // no noise and no reverberation: x = target = speech crop
};

std::pair<double, double> snr_range(NoiseMode mode);

struct SamplerConfig {
  double sample_seconds = 1.0;
  int sample_rate = dsp::kCodecSampleRate;
  double reverb_probability = 0.5;
  double room_min = 3.0, room_max = 10.0;  // side length range, metres
  double beta_min = 0.3, beta_max = 0.9;
  int max_order = 10;
  double wall_margin = 0.5;  // minimum source/mic distance from any wall
  bool convolve_noise = false;
  int max_attempts = 100;  // crops tried before giving up on silent material
};

struct TrainingExample {
  dsp::Waveform x;
  dsp::Waveform target;
  double snr_db = INFINITY;
  std::optional<RoomSpec> room;
  std::size_t speech_index = 0;
  std::optional<std::size_t> noise_index;
};

/// Draws a random room within the configured ranges.
RoomSpec sample_room(std::mt19937_64& rng, const SamplerConfig& cfg);

/// Weighted speech and noise draw, random crops of sample_seconds, optional
/// reverberation of the speech, SNR drawn uniformly for the mode. Crops with
/// zero power are redrawn. Fully determined by the rng state.
TrainingExample sample_training_example(Corpus& corpus, std::mt19937_64& rng, NoiseMode mode,
                                        const SamplerConfig& cfg = {});

}  // namespace vqwave::data
