#include "vqwave/data/mixing.hpp"

#include <algorithm>
#include <cmath>

#include "vqwave/dsp/signal.hpp"

namespace vqwave::data {

double snr_scale(double speech_power, double noise_power, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::sqrt(speech_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

Mixture mix_at_snr(const MixtureSpec& spec) {
  const auto& s = spec.speech.vector();
  const std::size_t len = s.size();
  if (len == 0) throw invalid_input("mix: empty speech");
  if (spec.noise.size() < len) throw invalid_input("mix: noise shorter than speech");
  if (spec.speech.sample_rate() != spec.noise.sample_rate()) throw incompatible("mix: speech and noise rates differ");
  if (std::isnan(spec.snr_db) || spec.snr_db == -INFINITY) throw invalid_input("mix: invalid SNR");

  std::vector<double> r = s;
  std::vector<double> n(spec.noise.vector().begin(), spec.noise.vector().begin() + static_cast<std::ptrdiff_t>(len));
  if (spec.rir) {
    r = dsp::convolve(s, *spec.rir);
    r.resize(len);
    if (spec.convolve_noise) {
      n = dsp::convolve(n, *spec.rir);
      n.resize(len);
    }
  }
  const double pr = dsp::mean_power(r);
  const double pn = dsp::mean_power(n);
  if (pr == 0.0) throw SilentSegmentError("mix: speech segment has zero power");
  if (pn == 0.0) throw SilentSegmentError("mix: noise segment has zero power");

  Mixture m;
  m.alpha = snr_scale(pr, pn, spec.snr_db);
  std::vector<double> x(len);
  double peak = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    x[i] = r[i] + m.alpha * n[i];
    peak = std::max(peak, std::abs(x[i]));
  }
  m.achieved_snr_db = m.alpha == 0.0 ? INFINITY : 10.0 * std::log10(pr / (m.alpha * m.alpha * pn));
  std::vector<double> target = s;
  if (peak > kMixPeak) {
    m.gain = kMixPeak / peak;
    for (double& v : x) v *= m.gain;
    for (double& v : target) v *= m.gain;
  }
  for (double& v : x) v = std::clamp(v, -1.0, 1.0);
  m.x = dsp::Waveform(std::move(x), spec.speech.sample_rate());
  m.target = dsp::Waveform(std::move(target), spec.speech.sample_rate());
  return m;
}

}  // namespace vqwave::data
