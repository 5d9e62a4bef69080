#include "vqwave/data/sampler.hpp"

#include <cmath>

#include "vqwave/dsp/signal.hpp"

namespace vqwave::data {

namespace {

dsp::Waveform crop(const dsp::Waveform& w, std::size_t len, std::mt19937_64& rng) {
  if (w.size() < len) {
    throw invalid_input("corpus clip of " + std::to_string(w.size()) + " samples is shorter than the " +
                        std::to_string(len) + "-sample crop");
  }
  std::uniform_int_distribution<std::size_t> off(0, w.size() - len);
  const auto o = static_cast<std::ptrdiff_t>(off(rng));
  return dsp::Waveform(std::vector<double>(w.vector().begin() + o, w.vector().begin() + o + static_cast<std::ptrdiff_t>(len)),
                       w.sample_rate());
}

std::size_t draw(const std::vector<double>& weights, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
  return d(rng);
}

}  // namespace

std::pair<double, double> snr_range(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::Standard: return {-5.0, 25.0};
    case NoiseMode::LowNoise: return {5.0, 25.0};
    case NoiseMode::Clean: return {INFINITY, INFINITY};
  }
  return {-5.0, 25.0};
}

RoomSpec sample_room(std::mt19937_64& rng, const SamplerConfig& cfg) {
  std::uniform_real_distribution<double> side(cfg.room_min, cfg.room_max);
  std::uniform_real_distribution<double> beta(cfg.beta_min, cfg.beta_max);
  RoomSpec room;
  for (double& d : room.dimensions) d = side(rng);
  room.reflection_coefficient = beta(rng);
  room.max_order = cfg.max_order;
  do {
    for (int i = 0; i < 3; ++i) {
      std::uniform_real_distribution<double> pos(cfg.wall_margin, room.dimensions[i] - cfg.wall_margin);
      room.source[i] = pos(rng);
      room.mic[i] = pos(rng);
    }
  } while (distance(room.source, room.mic) < cfg.wall_margin);
  return room;
}

TrainingExample sample_training_example(Corpus& corpus, std::mt19937_64& rng, NoiseMode mode,
                                        const SamplerConfig& cfg) {
  if (corpus.speech_count() == 0) throw invalid_input("sampler: no speech in corpus");
  if (mode != NoiseMode::Clean && corpus.noise_count() == 0) throw invalid_input("sampler: no noise in corpus");
  const double exact = cfg.sample_seconds * cfg.sample_rate;
  const auto len = static_cast<std::size_t>(std::llround(exact));
  if (len == 0 || std::abs(exact - static_cast<double>(len)) > 1e-9) {
    throw invalid_input("sampler: sample_seconds * sample_rate must be a positive integer");
  }

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    TrainingExample ex;
    ex.speech_index = draw(corpus.speech_weights(), rng);
    dsp::Waveform s = crop(corpus.speech(ex.speech_index), len, rng);
    if (mode == NoiseMode::Clean) {
      if (dsp::mean_power(s.samples()) == 0.0) continue;
      ex.x = s;
      ex.target = std::move(s);
      return ex;
    }
    ex.noise_index = draw(corpus.noise_weights(), rng);
    dsp::Waveform n = crop(corpus.noise(*ex.noise_index), len, rng);
    const auto [lo, hi] = snr_range(mode);
    ex.snr_db = std::uniform_real_distribution<double>(lo, hi)(rng);
    MixtureSpec spec{std::move(s), std::move(n), std::nullopt, ex.snr_db, cfg.convolve_noise};
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.reverb_probability) {
      ex.room = sample_room(rng, cfg);
      spec.rir = normalized_rir(*ex.room, cfg.sample_rate);
    }
    try {
      Mixture m = mix_at_snr(spec);
      ex.x = std::move(m.x);
      ex.target = std::move(m.target);
      return ex;
    } catch (const SilentSegmentError&) {
      continue;
    }
  }
  throw invalid_input("sampler: no non-silent crop found after " + std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace vqwave::data
