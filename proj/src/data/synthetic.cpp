#include "vqwave/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace vqwave::data {

namespace {

// Gain of a resonance at frequency f for a peak at fc with bandwidth bw.
double resonance(double f, double fc, double bw) {
  const double x = (f - fc) / bw;
  return 1.0 / (1.0 + x * x);
}

}  // namespace

dsp::Waveform synthetic_speech(double seconds, std::mt19937_64& rng, int sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> out(n, 0.0);
  std::uniform_real_distribution<double> seg_len(0.12, 0.35), pause_len(0.03, 0.12);
  std::uniform_real_distribution<double> f0_dist(100.0, 220.0), glide(-0.3, 0.3);
  std::uniform_real_distribution<double> f1_dist(300.0, 900.0), f2_dist(900.0, 2500.0);
  std::uniform_real_distribution<double> start_pause(0.0, 0.08);
  const double two_pi = 2.0 * std::numbers::pi;

  std::size_t pos = static_cast<std::size_t>(start_pause(rng) * sample_rate);
  while (pos < n) {
    const auto len = std::min(n - pos, static_cast<std::size_t>(seg_len(rng) * sample_rate));
    const double f0 = f0_dist(rng), slope = glide(rng);
    const double f1 = f1_dist(rng), f2 = f2_dist(rng);
    const int harmonics = std::max(1, static_cast<int>(4000.0 / f0));
    std::vector<double> amp(static_cast<std::size_t>(harmonics));
    double norm = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
      const double f = h * f0;
      amp[h - 1] = (resonance(f, f1, 120.0) + 0.6 * resonance(f, f2, 200.0) + 0.02) / h;
      norm += amp[h - 1];
    }
    double phase = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(len);
      const double f = f0 * (1.0 + slope * t);
      phase += two_pi * f / sample_rate;
      const double env = std::sin(std::numbers::pi * t);
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h) v += amp[h - 1] * std::sin(h * phase);
      out[pos + i] = 0.5 * env * env * v / norm;
    }
    pos += len + static_cast<std::size_t>(pause_len(rng) * sample_rate);
  }
  return dsp::Waveform(std::move(out), sample_rate);
}

dsp::Waveform synthetic_noise(SyntheticNoise kind, double seconds, std::mt19937_64& rng, int sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = nd(rng);
  if (kind == SyntheticNoise::Pink) {
    // Paul Kellet's economy pink filter.
    double b0 = 0, b1 = 0, b2 = 0;
    for (double& v : out) {
      b0 = 0.99765 * b0 + v * 0.0990460;
      b1 = 0.96300 * b1 + v * 0.2965164;
      b2 = 0.57000 * b2 + v * 1.0526913;
      v = b0 + b1 + b2 + v * 0.1848;
    }
  } else if (kind == SyntheticNoise::Modulated) {
    std::uniform_real_distribution<double> rate(1.0, 6.0), ph(0.0, 2.0 * std::numbers::pi);
    const double r = rate(rng), p = ph(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double env = 0.2 + 0.8 * std::pow(std::sin(std::numbers::pi * r * i / sample_rate + p), 2);
      out[i] *= env;
    }
  }
  double power = 0.0;
  for (double v : out) power += v * v;
  const double scale = power > 0 ? 0.25 / std::sqrt(power / static_cast<double>(n)) : 1.0;
  for (double& v : out) v *= scale;
  return dsp::Waveform(std::move(out), sample_rate);
}

}  // namespace vqwave::data
