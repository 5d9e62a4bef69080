#include "vqwave/dsp/mulaw.hpp"

#include <algorithm>
#include <cmath>

namespace vqwave::dsp {

namespace {
constexpr double kMu = 255.0;
const double kLogOnePlusMu = std::log1p(kMu);
}  // namespace

std::uint8_t mulaw_encode_sample(double x) {
  x = std::clamp(x, -1.0, 1.0);
  const double f = std::copysign(std::log1p(kMu * std::abs(x)) / kLogOnePlusMu, x);
  // round half up
  const double code = std::floor((f + 1.0) / 2.0 * kMu + 0.5);
  return static_cast<std::uint8_t>(std::clamp(code, 0.0, kMu));
}

double mulaw_decode_sample(std::uint8_t code) {
  const double f = mulaw_code_to_unit(code);
  const double y = std::copysign((std::pow(kMu + 1.0, std::abs(f)) - 1.0) / kMu, f);
  return std::clamp(y, -1.0, 1.0);
}

MuLawCode mulaw_encode(std::span<const double> samples) {
  MuLawCode out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(), mulaw_encode_sample);
  return out;
}

MuLawCode mulaw_encode(const Waveform& w) { return mulaw_encode(w.samples()); }

Waveform mulaw_decode(std::span<const std::uint8_t> codes, int sample_rate) {
  std::vector<double> out(codes.size());
  std::transform(codes.begin(), codes.end(), out.begin(), mulaw_decode_sample);
  return Waveform(std::move(out), sample_rate);
}

}  // namespace vqwave::dsp
