#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vqwave::dsp {

inline constexpr int kCodecSampleRate = 16000;

/// Mono audio with samples clamped to [-1, 1] on construction.
class Waveform {
 public:
  Waveform() = default;
  Waveform(std::vector<double> samples, int sample_rate);

  std::span<const double> samples() const { return samples_; }
  const std::vector<double>& vector() const { return samples_; }
  int sample_rate() const { return sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double duration_seconds() const;

  /// Throws Incompatible unless the rate is the codec rate (16 kHz).
  void require_codec_rate() const;

 private:
  std::vector<double> samples_;
  int sample_rate_ = kCodecSampleRate;
};

/// 8-bit mu-law codes; uint8_t keeps every code in [0, 255].
using MuLawCode = std::vector<std::uint8_t>;

}  // namespace vqwave::dsp
