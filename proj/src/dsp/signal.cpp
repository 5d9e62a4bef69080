#include "vqwave/dsp/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

namespace vqwave::dsp {

namespace {
std::mutex g_plan_mutex;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < out_len) n <<= 1;
  const std::size_t n_freq = n / 2 + 1;

  std::vector<double> fa(n, 0.0), fb(n, 0.0), result(n);
  std::vector<std::complex<double>> sa(n_freq), sb(n_freq);
  std::copy(a.begin(), a.end(), fa.begin());
  std::copy(b.begin(), b.end(), fb.begin());

  fftw_plan pa, pb, inv;
  {
    std::lock_guard lock(g_plan_mutex);
    const int ni = static_cast<int>(n);
    pa = fftw_plan_dft_r2c_1d(ni, fa.data(), reinterpret_cast<fftw_complex*>(sa.data()), FFTW_ESTIMATE);
    pb = fftw_plan_dft_r2c_1d(ni, fb.data(), reinterpret_cast<fftw_complex*>(sb.data()), FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(ni, reinterpret_cast<fftw_complex*>(sa.data()), result.data(), FFTW_ESTIMATE);
  }
  fftw_execute(pa);
  fftw_execute(pb);
  for (std::size_t k = 0; k < n_freq; ++k) sa[k] *= sb[k];
  fftw_execute(inv);
  {
    std::lock_guard lock(g_plan_mutex);
    fftw_destroy_plan(pa);
    fftw_destroy_plan(pb);
    fftw_destroy_plan(inv);
  }
  result.resize(out_len);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : result) v *= scale;
  return result;
}

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double segmental_snr(std::span<const double> reference, std::span<const double> estimate,
                     const SegmentalSnrOptions& opts) {
  const std::size_t n = std::min(reference.size(), estimate.size());
  if (std::equal(reference.begin(), reference.begin() + n, estimate.begin())) {
    return std::numeric_limits<double>::infinity();
  }
  const std::size_t flen = static_cast<std::size_t>(opts.frame_length);
  const std::size_t frames = n / flen;
  std::vector<double> sig(frames), err(frames);
  double loudest = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = f * flen; i < (f + 1) * flen; ++i) {
      sig[f] += reference[i] * reference[i];
      const double d = reference[i] - estimate[i];
      err[f] += d * d;
    }
    loudest = std::max(loudest, sig[f]);
  }
  const double gate = loudest * std::pow(10.0, opts.silence_db / 10.0);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (sig[f] <= 0.0 || sig[f] < gate) continue;
    const double db = err[f] > 0.0 ? 10.0 * std::log10(sig[f] / err[f]) : opts.max_db;
    total += std::clamp(db, opts.min_db, opts.max_db);
    ++used;
  }
  return used ? total / static_cast<double>(used) : opts.min_db;
}

}  // namespace vqwave::dsp
