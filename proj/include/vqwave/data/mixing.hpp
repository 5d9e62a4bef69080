#pragma once

#include <optional>
#include <vector>

#include "vqwave/dsp/waveform.hpp"
#include "vqwave/error.hpp"

namespace vqwave::data {

struct MixtureSpec {
  dsp::Waveform speech;  // s, also the enhancement target
  dsp::Waveform noise;   // n, at least as long as speech; the leading part is used
  std::optional<std::vector<double>> rir;  // h; r = s * h truncated to len(s)
  double snr_db = 0.0;                     // +infinity gives x = r
  bool convolve_noise = false;             // also apply h to the noise
};

struct Mixture {
  dsp::Waveform x;       // clamp(g * (r + alpha * n))
  dsp::Waveform target;  // g * s
  double alpha = 0.0;
  double gain = 1.0;             // g < 1 only when the mixture peak exceeded kMixPeak
  double achieved_snr_db = 0.0;  // 10 log10(P_r / P_{alpha n}) before gain and clamping
};

inline constexpr double kMixPeak = 0.99;

/// Thrown when the speech (after the RIR) or the noise segment has zero power.
class SilentSegmentError : public Error {
 public:
  explicit SilentSegmentError(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

/// alpha = sqrt(P_r / (P_n 10^(snr/10))).
double snr_scale(double speech_power, double noise_power, double snr_db);

Mixture mix_at_snr(const MixtureSpec& spec);

}  // namespace vqwave::data
