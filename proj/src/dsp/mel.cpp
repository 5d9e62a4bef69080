#include "vqwave/dsp/mel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "vqwave/error.hpp"

namespace vqwave::dsp {

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

int MelConfig::hop_samples() const { return static_cast<int>(std::lround(hop_seconds * sample_rate)); }
int MelConfig::window_samples() const { return static_cast<int>(std::lround(window_seconds * sample_rate)); }
int MelConfig::fft_size() const {
  int n = 1;
  while (n < window_samples()) n <<= 1;
  return n;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  const int n_fft = cfg.fft_size();
  const int n_freq = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min);
  const double mel_hi = hz_to_mel(cfg.f_max);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (int i = 0; i < cfg.mel_bins + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.mel_bins + 1));
  }
  std::vector<double> fb(static_cast<std::size_t>(cfg.mel_bins) * n_freq, 0.0);
  for (int m = 0; m < cfg.mel_bins; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_freq; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / n_fft;
      const double w = std::min((f - lo) / (centre - lo), (hi - f) / (hi - centre));
      fb[static_cast<std::size_t>(m) * n_freq + k] = std::max(0.0, w);
    }
  }
  return fb;
}

int mel_frame_count(std::size_t num_samples, const MelConfig& cfg) {
  return static_cast<int>(num_samples / static_cast<std::size_t>(cfg.hop_samples()));
}

LogMelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg) {
  if (w.sample_rate() != cfg.sample_rate) {
    throw incompatible("log_mel: waveform rate " + std::to_string(w.sample_rate()) + " Hz does not match mel config " +
                       std::to_string(cfg.sample_rate) + " Hz");
  }
  const int hop = cfg.hop_samples();
  const int win = cfg.window_samples();
  if (hop <= 0 || win <= 0 || cfg.mel_bins <= 0) throw usage_error("log_mel: invalid mel configuration");
  const int frames = mel_frame_count(w.size(), cfg);
  if (w.size() < static_cast<std::size_t>(win) || frames < 1) throw invalid_input("input too short");

  const int n_fft = cfg.fft_size();
  const int n_freq = n_fft / 2 + 1;
  const std::vector<double> fb = mel_filterbank(cfg);

  std::vector<double> window(win);
  for (int n = 0; n < win; ++n) window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n_fft)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_freq)));
  PlanPtr plan;
  {
    std::lock_guard lock(fftw_plan_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(n_fft, in.get(), out.get(), FFTW_ESTIMATE));
  }

  LogMelSpectrogram mel;
  mel.frames = frames;
  mel.bins = cfg.mel_bins;
  mel.hop_seconds = cfg.hop_seconds;
  mel.window_seconds = cfg.window_seconds;
  mel.values.resize(static_cast<std::size_t>(frames) * cfg.mel_bins);

  const auto samples = w.samples();
  const long long n_samples = static_cast<long long>(samples.size());
  std::vector<double> power(n_freq);
  for (int t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t) * hop + hop / 2 - win / 2;
    std::fill(in.get(), in.get() + n_fft, 0.0);
    for (int n = 0; n < win; ++n) {
      const long long idx = start + n;
      if (idx >= 0 && idx < n_samples) in.get()[n] = samples[static_cast<std::size_t>(idx)] * window[n];
    }
    fftw_execute(plan.get());
    for (int k = 0; k < n_freq; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      power[k] = re * re + im * im;
    }
    for (int m = 0; m < cfg.mel_bins; ++m) {
      const double* row = fb.data() + static_cast<std::size_t>(m) * n_freq;
      double e = 0.0;
      for (int k = 0; k < n_freq; ++k) e += row[k] * power[k];
      mel.values[static_cast<std::size_t>(t) * cfg.mel_bins + m] = std::log(std::max(e, cfg.power_floor));
    }
  }
  return mel;
}

}  // namespace vqwave::dsp
