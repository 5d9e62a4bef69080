#pragma once

#include <span>
#include <vector>

namespace vqwave::dsp {

/// Full linear convolution (length a + b - 1) computed with an FFT.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

/// Mean of squares; 0 for empty input.
double mean_power(std::span<const double> x);

struct SegmentalSnrOptions {
  int frame_length = 320;
  double min_db = -10.0;
  double max_db = 35.0;
  // Frames whose reference energy is this far below the loudest frame are skipped.
  double silence_db = -40.0;
};

/// Mean per-frame SNR of `estimate` against `reference` (clamped per frame).
/// Returns +infinity when the two signals are identical.
double segmental_snr(std::span<const double> reference, std::span<const double> estimate,
                     const SegmentalSnrOptions& opts = {});

}  // namespace vqwave::dsp
