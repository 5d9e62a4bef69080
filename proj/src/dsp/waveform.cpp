#include "vqwave/dsp/waveform.hpp"

#include <algorithm>
#include <string>

#include "vqwave/error.hpp"

namespace vqwave::dsp {

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate <= 0) throw invalid_input("sample rate must be positive");
  for (double& s : samples_) s = std::clamp(s, -1.0, 1.0);
}

double Waveform::duration_seconds() const {
  return static_cast<double>(samples_.size()) / sample_rate_;
}

void Waveform::require_codec_rate() const {
  if (sample_rate_ != kCodecSampleRate) {
    throw incompatible("sample rate " + std::to_string(sample_rate_) + " Hz is not supported; the codec requires " +
                       std::to_string(kCodecSampleRate) + " Hz");
  }
}

}  // namespace vqwave::dsp
