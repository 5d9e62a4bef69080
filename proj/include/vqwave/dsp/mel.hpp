#pragma once

#include <cstddef>
#include <vector>

#include "vqwave/dsp/waveform.hpp"

namespace vqwave::dsp {

struct MelConfig {
  int sample_rate = kCodecSampleRate;
  double hop_seconds = 0.010;
  // 25 ms by default. 0.250 is accepted as well.
  double window_seconds = 0.025;
  int mel_bins = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double power_floor = 1e-10;

  int hop_samples() const;
  int window_samples() const;
  int fft_size() const;
};

/// Row-major frames x bins matrix of log mel power.
struct LogMelSpectrogram {
  std::vector<double> values;
  int frames = 0;
  int bins = 0;
  double hop_seconds = 0.0;
  double window_seconds = 0.0;

  double at(int frame, int bin) const { return values[static_cast<std::size_t>(frame) * bins + bin]; }
};

/// Number of analysis frames produced for `num_samples` input samples (floor(N / hop)).
int mel_frame_count(std::size_t num_samples, const MelConfig& cfg);

/// Hann-windowed STFT power -> triangular mel filterbank -> log(max(power, floor)).
/// Frame t is centred on sample t*hop + hop/2; samples outside the signal read as zero.
/// Throws InvalidInput("input too short") when the signal is shorter than one window.
LogMelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg = {});

/// Triangular HTK-mel filterbank, bins x (fft_size/2 + 1), row-major.
std::vector<double> mel_filterbank(const MelConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace vqwave::dsp
